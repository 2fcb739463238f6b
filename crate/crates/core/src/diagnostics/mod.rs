//! Equivalence, smoothness, operation-count and spatial diagnostics.

mod equivalence;
mod flops;
mod gradcheck;
mod maps;
mod probe;
mod suites;
mod workload;

pub use equivalence::{
    equivalence_case, equivalence_deviation, equivalence_suite, EquivRecord, EquivReport, EQUIV_TOL,
};
pub use flops::{flop_count, FlopPoint, FlopReport, Poly, Stage, StageCount};
pub use gradcheck::{
    central_difference, gradcheck, gradcheck_guarded, smoothness_case, smoothness_record,
    CoordinateCheck, GradCheckOptions, GradCheckReport, SmoothnessRecord, RATIO_MAX, RATIO_MIN,
};
pub use maps::{
    channel_saliency_map, channel_saliency_raw, delta_attn_map, delta_attn_raw, difference_map,
    token_norm_map, token_norm_raw, DiagnosticMap, Normalization,
};
pub use probe::{diagnostic_input, diagnostic_maps, DiagnosticSet, Probe};
pub use suites::{ablation_lattice, ffn_check, AblationRecord, FfnCheckRecord};
pub use workload::Workload;
