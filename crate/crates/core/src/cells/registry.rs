use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::{Activation, GatedCell, RecurrentCell, SimpleCell, Variant, VariantSpec};
use crate::error::{Error, Result};

pub type CellFactory = fn(Activation) -> Box<dyn RecurrentCell>;

/// Name → constructor table for cell variants. Lookups are case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct CellRegistry {
    factories: BTreeMap<String, CellFactory>,
}

fn gated(variant: Variant, activation: Activation) -> Box<dyn RecurrentCell> {
    Box::new(GatedCell::new(VariantSpec::new(variant, activation)))
}

impl CellRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The seven built-in variants, keyed `srn`, `lstm`, `lstm4`, `lstm5`,
    /// `lstm4a`, `lstm5a`, `lstm6`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register("srn", |a| Box::new(SimpleCell::new(a)));
        reg.register("lstm", |a| gated(Variant::Lstm, a));
        reg.register("lstm4", |a| gated(Variant::Lstm4, a));
        reg.register("lstm5", |a| gated(Variant::Lstm5, a));
        reg.register("lstm4a", |a| gated(Variant::Lstm4a, a));
        reg.register("lstm5a", |a| gated(Variant::Lstm5a, a));
        reg.register("lstm6", |a| gated(Variant::Lstm6, a));
        reg
    }

    /// Shared instance of [`CellRegistry::with_builtins`].
    pub fn builtin() -> &'static CellRegistry {
        static BUILTIN: OnceLock<CellRegistry> = OnceLock::new();
        BUILTIN.get_or_init(CellRegistry::with_builtins)
    }

    /// Registers (or replaces) a factory under `name`.
    pub fn register(&mut self, name: &str, factory: CellFactory) -> Option<CellFactory> {
        self.factories.insert(name.to_ascii_lowercase(), factory)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(&name.to_ascii_lowercase())
    }

    pub fn build(&self, name: &str, activation: Activation) -> Result<Box<dyn RecurrentCell>> {
        self.factories
            .get(&name.to_ascii_lowercase())
            .map(|factory| factory(activation))
            .ok_or_else(|| Error::UnknownVariant {
                name: name.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })
    }
}
