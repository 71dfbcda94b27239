//! Instance I/O, seeded generators and the check suite.

pub mod generate;
pub mod instance;
pub mod report;
pub mod suite;

pub use generate::{clean_sqrt, generate_instance, IdealSpec, Recipe, Sampler, SymbolSpec, TargetClass, VarietyShape};
pub use instance::{emit_instance, parse_instance, parse_symbol, Instance, Meta};
pub use report::{Check, Report};
pub use suite::{run_criterion, run_suite, SuiteConfig};
