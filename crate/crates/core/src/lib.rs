//! Upper bounds on the partitioning functions, growth function and VC
//! dimension of binary decision-tree classes, and tree growing and pruning
//! built on top of them.

pub mod bounds;
pub mod bruteforce;
pub mod combinatorics;
pub mod data;
pub mod experiment;
pub mod induction;
pub mod pruning;
pub mod tree;
pub mod verify;

pub use bounds::{BoundCache, KClamp, PriorConfig};
pub use combinatorics::LogNumber;
pub use data::{Dataset, Example, FeatureLandscape};
pub use tree::{DecisionRule, NodePath, PruneEdit, Tree, TreeShape};
