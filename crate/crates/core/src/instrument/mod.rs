//! Analyses of trained and untrained models: multiply-accumulate accounting,
//! attention heatmaps, a symbolic oracle for task 1 and Table 1 reproduction.

mod heatmap;
mod ops;
mod oracle;
mod table1;

pub use heatmap::{export_attention, HeatRow, HeatmapDump, Section, HEATMAP_HEADER};
pub use ops::{
    attention_macs, count_ops, gru_step_macs, instrumented_ops, stack_step_macs, synthetic_example,
    MeasuredOps, OpCountReport, StoryShape,
};
pub use oracle::{last_mention, oracle_task1, MOVE_VERBS};
pub use table1::{
    reported_solved, reproduce_table1, solved, ReportRow, ReproduceOptions, Table1Report,
    SOLVED_BELOW, TABLE1_AMN,
};
