//! The bundled benchmark programs and their expected outcomes.

use crate::error::ParseError;
use crate::spec_format::parse_program;
use crate::system::Program;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Safe,
    Unsafe,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Safe => "safe",
            Status::Unsafe => "unsafe",
        }
    }
}

/// Search configuration as in the result table: plain backward search, or
/// with acceleration preprocessing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Config {
    Plain,
    Accel,
}

#[derive(Clone, Debug)]
pub struct BenchmarkEntry {
    pub name: &'static str,
    pub file: &'static str,
    pub source: &'static str,
    pub expected: Status,
    /// Configurations the published results report as terminating.
    pub terminates: &'static [Config],
    /// Row of the published result table, when there is one.
    pub table_row: Option<&'static str>,
    /// Encoding written for this repository rather than taken verbatim.
    pub reconstructed: bool,
}

impl BenchmarkEntry {
    pub fn program(&self) -> Result<Program, ParseError> {
        parse_program(self.source)
    }

    pub fn expects_termination(&self, c: Config) -> bool {
        self.terminates.contains(&c)
    }
}

macro_rules! entry {
    ($name:literal, $status:ident, [$($c:ident),*], $row:expr, $recon:literal) => {
        BenchmarkEntry {
            name: $name,
            file: concat!($name, ".spec"),
            source: include_str!(concat!("../corpus/", $name, ".spec")),
            expected: Status::$status,
            terminates: &[$(Config::$c),*],
            table_row: $row,
            reconstructed: $recon,
        }
    };
}

pub fn entries() -> Vec<BenchmarkEntry> {
    vec![
        entry!("reverse", Safe, [Accel], None, false),
        entry!("alldiff", Safe, [], Some("all diff 2"), false),
        entry!("init", Safe, [Accel], Some("init"), true),
        entry!("init-test", Safe, [], Some("init test"), true),
        entry!("copy", Safe, [Accel], Some("copy"), true),
        entry!("compare", Safe, [], Some("compare"), true),
        entry!("find", Safe, [Accel], Some("find 2"), true),
        entry!("linear-search", Safe, [Accel], Some("linear search"), true),
        entry!("strcpy", Safe, [Accel], Some("strcpy"), true),
        entry!("strlen", Safe, [Accel], Some("strlen"), true),
        entry!("partition", Safe, [], Some("partition"), true),
        entry!("reverse-bug", Unsafe, [Plain, Accel], None, true),
        entry!("copy-bug", Unsafe, [Plain, Accel], None, true),
        entry!("init-bug", Unsafe, [Plain, Accel], None, true),
    ]
}

pub fn find(name: &str) -> Option<BenchmarkEntry> {
    entries().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_parses() {
        for e in entries() {
            let p = e.program().unwrap_or_else(|err| panic!("{}: {err}", e.name));
            assert!(!p.transitions.is_empty(), "{}", e.name);
        }
    }

    #[test]
    fn shapes_of_the_worked_examples() {
        let r = find("reverse").unwrap().program().unwrap();
        assert_eq!(r.transitions.len(), 4);
        assert_eq!((r.init.as_str(), r.error.as_str()), ("l1", "l4"));
        let a = find("alldiff").unwrap().program().unwrap();
        let names: Vec<&str> = a.transitions.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8"]);
    }
}
