from .algorithms import (
    ALGORITHMS,
    SynthesisConfig,
    SyntheticBundle,
    fieldgroups_threshold,
    synth_dpsyn,
    synth_fieldgroups,
    synthesize,
)
from .bundle import read_manifest, read_replicates, write_bundle
from .consistency import enforce_consistency, ipf, max_disagreement
from .marginals import GroupingPlan, MarginalTable, build_marginal, sample_group

__all__ = [
    "ALGORITHMS",
    "GroupingPlan",
    "MarginalTable",
    "SynthesisConfig",
    "SyntheticBundle",
    "build_marginal",
    "enforce_consistency",
    "fieldgroups_threshold",
    "ipf",
    "max_disagreement",
    "read_manifest",
    "read_replicates",
    "sample_group",
    "synth_dpsyn",
    "synth_fieldgroups",
    "synthesize",
    "write_bundle",
]
