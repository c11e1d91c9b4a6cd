"""tracelens: cluster-trace workload characterization and synthesis.

Ingest trace tables into per-job records, cluster jobs by resource usage,
fit arrival/usage/runtime distribution models, and generate synthetic
traces that round-trip through the same pipeline.
"""

from .cluster import (
    ArrivalClusters,
    ClusterModel,
    JobClassification,
    classify_jobs,
    cluster_arrivals,
    kmeanspp_seed,
    lloyd,
    silhouette,
    sweep_k,
)
from .distfit import (
    Ecdf,
    ecdf,
    fit_pareto_tail,
    fit_weibull,
    fit_zipf,
    ks_statistic,
    tail_skewness_report,
    weibull_cdf,
    weibull_pdf,
    weibull_quantile,
)
from .errors import ContractError, DegenerateDataError, FitError, SpecError, TraceLensError
from .ingest import (
    BuildStats,
    Table,
    build_job_table,
    filter_window,
    interarrival_times,
    open_table,
    read_job_table,
    write_job_table,
)
from .synth import (
    SynthesisSpec,
    default_spec,
    emit_trace,
    gen_interarrivals,
    gen_job_stream,
    parse_spec_file,
)
from .trace_model import (
    MISSING,
    DistKind,
    EventType,
    FittedDistribution,
    JobClass,
    JobEvent,
    JobRecord,
    MachineEvent,
    TaskEvent,
    TaskUsage,
    TerminalEvent,
)

__version__ = "0.1.0"
