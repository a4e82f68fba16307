//! Time-optimal control of the chain `x1' = u`, `xj' = x1^(j-1)` under
//! `|u| <= 1`, solved through truncated Hausdorff moment problems.

pub mod casesolver;
pub mod cli;
pub mod compensated;
pub mod control;
pub mod hankel;
pub mod hausdorff;
pub mod moments;
pub mod polyalg;
pub mod oracle;
