//! Interned identifiers.
//!
//! Selectors, variable names and symbol literals are compared and hashed on
//! every send, so they are interned once into a process-wide table and
//! carried around as a `u32`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

#[derive(Default)]
struct Interner {
    ids: HashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

fn interner() -> &'static Mutex<Interner> {
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

impl Sym {
    pub fn new(name: &str) -> Sym {
        let mut table = interner().lock().expect("symbol table poisoned");
        if let Some(&id) = table.ids.get(name) {
            return Sym(id);
        }
        // Interned names live for the whole process.
        let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
        let id = table.names.len() as u32;
        table.names.push(leaked);
        table.ids.insert(leaked, id);
        Sym(id)
    }

    pub fn as_str(self) -> &'static str {
        interner().lock().expect("symbol table poisoned").names[self.0 as usize]
    }

    /// Number of arguments a message with this selector takes.
    pub fn arity(self) -> usize {
        selector_arity(self.as_str())
    }
}

pub fn selector_arity(name: &str) -> usize {
    if name.is_empty() {
        return 0;
    }
    let first = name.chars().next().unwrap();
    if !(first.is_alphabetic() || first == '_') {
        return 1;
    }
    name.chars().filter(|&c| c == ':').count()
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.as_str())
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Sym {
    fn from(name: &str) -> Self {
        Sym::new(name)
    }
}
