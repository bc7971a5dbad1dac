"""ECG-derived respiratory rate toolkit."""

from ._edrkit import (
    DataError,
    Model,
    NumericError,
    PrerequisiteError,
    UsageError,
    __version__,
    accept_label,
    count_layers,
    count_params,
    grad_check,
    mae,
    one_sample_ttest,
    r2,
    read_native,
    read_wfdb,
    resample_to_120hz,
    resp_failure,
    student_t_sf,
    synth_ecg,
    train,
    welch_ttest,
    znormalize,
)

__all__ = [
    "DataError",
    "Model",
    "NumericError",
    "PrerequisiteError",
    "UsageError",
    "__version__",
    "accept_label",
    "count_layers",
    "count_params",
    "grad_check",
    "mae",
    "one_sample_ttest",
    "r2",
    "read_native",
    "read_wfdb",
    "resample_to_120hz",
    "resp_failure",
    "student_t_sf",
    "synth_ecg",
    "train",
    "welch_ttest",
    "znormalize",
]
