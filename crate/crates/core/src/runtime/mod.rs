//! Partition-parallel execution and the analytical cost model.

mod cost;
mod pool;

pub use cost::{
    assemble_flops, cholesky_flops, dkrr_comm, estimate_time, gram_flops, predict_flops,
    solve_flops, theoretical_speedup, training_flops, weak_scaling_report, weak_scaling_rows,
    CostModel, ScalingModel, SpeedupVariant, WeakScalingRow, WeakScalingStep, DKRR_COMM_COEFF,
};
pub use pool::{Counters, RunStats, Runtime, TaskStats};
