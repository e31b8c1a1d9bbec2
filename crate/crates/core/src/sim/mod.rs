//! World model, task scheduling and the closed-loop simulator.

mod log;
mod run;
mod schedule;
mod world;

pub use log::{parse_csv, sig9, to_csv, LogError, Record, TaskSummary, TrajectoryLog, CSV_HEADER};
pub use run::{run_scenario, SimError, MAX_RETRIES};
pub use schedule::{literals, schedule_tasks, Invariant, Schedule, ScheduleError, Task};
pub use world::{
    obstacle_state, Motion, Obstacle, Shape, SpeedCaps, World, Zone, ZoneMode,
    DEFAULT_OBSTACLE_RADIUS, DEFAULT_SAFETY_MARGIN,
};
