//! Checking and bounding coinductive global bisimulation distances.

pub mod ccd;
pub mod cost;
pub mod domain;
pub mod io;
pub mod lab;
pub mod lts;
pub mod search;
pub mod stage_graph;
pub mod step;
pub mod telescope;
pub mod tree;

pub use cost::{Alpha, Cost, Rational};
pub use domain::{Action, ActionDomain};
pub use lts::{tree_equal, RegularTree};
pub use step::{Step, StepKind, StepSequence};
pub use tree::FiniteTree;
