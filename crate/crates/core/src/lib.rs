//! Signal Temporal Logic task planning with time-varying control barrier
//! functions, a speed-capped QP safety filter and velocity-aware deadline
//! retiming.

pub mod barrier;
pub mod control;
pub mod replan;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod stl;
