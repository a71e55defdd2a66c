use crate::error::{Error, Result};

/// Named constructors for one family of interchangeable strategies.
///
/// Lookup is case-insensitive and also matches the registered aliases, so
/// `"sbp21"`, `"SBP21"` and `"21"` can all resolve to the same entry.
pub struct Registry<C> {
    kind: &'static str,
    entries: Vec<Entry<C>>,
}

pub struct Entry<C> {
    pub name: &'static str,
    pub aliases: &'static [&'static str],
    pub summary: &'static str,
    pub constructor: C,
}

impl<C> Registry<C> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: Vec::new() }
    }

    /// Adds an entry. A later registration with the same name shadows the earlier one.
    pub fn register(
        &mut self,
        name: &'static str,
        aliases: &'static [&'static str],
        summary: &'static str,
        constructor: C,
    ) -> &mut Self {
        self.entries.insert(0, Entry { name, aliases, summary, constructor });
        self
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn entry(&self, name: &str) -> Result<&Entry<C>> {
        let wanted = name.trim();
        self.entries
            .iter()
            .find(|e| {
                e.name.eq_ignore_ascii_case(wanted)
                    || e.aliases.iter().any(|a| a.eq_ignore_ascii_case(wanted))
            })
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: wanted.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn get(&self, name: &str) -> Result<&C> {
        self.entry(name).map(|e| &e.constructor)
    }

    /// Canonical name for `name` (resolving aliases).
    pub fn canonical(&self, name: &str) -> Result<&'static str> {
        self.entry(name).map(|e| e.name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        let mut names: Vec<&'static str> = Vec::new();
        for e in self.entries.iter().rev() {
            if !names.contains(&e.name) {
                names.push(e.name);
            }
        }
        names.into_iter()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry<C>> {
        self.entries.iter()
    }
}
