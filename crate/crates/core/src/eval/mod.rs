//! Evaluation: Chamfer distance, observation protocols and benchmarks.

mod bench;
mod chamfer;
mod kdtree;
mod views;

pub use bench::{
    report_csv, report_table, run_benchmark, task_observations, BenchConfig, BenchMode,
    ChamferReport, ShapeResult, Task,
};
pub use chamfer::{add_noise, chamfer, chamfer_points, Chamfer, ChamferConfig, ChamferMetric};
pub use kdtree::KdTree;
pub use views::{
    visible_observations, visible_points, visible_surface_points, ObservationConfig, ViewSpec,
    CAMERA_DISTANCE, VIEW_COUNT, VISIBILITY_EPS,
};
