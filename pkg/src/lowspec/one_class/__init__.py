from .gmm import GmmConfig, GmmModel
from .heads import (
    HEAD_KINDS,
    OneClassHead,
    calibrate,
    fit_gmm,
    fit_head,
    fit_isolation_forest,
    fit_ocsvm,
    gmm_logpdf,
    load_head,
    predict_one_class,
    save_head,
    score_if,
    score_ocsvm,
    with_calibration,
)
from .iforest import IsoForestConfig, IsoForestModel
from .isotonic import IsotonicMap, fit_isotonic
from .ocsvm import OcSvmConfig, OcSvmModel

__all__ = [
    "GmmConfig", "GmmModel", "HEAD_KINDS", "IsoForestConfig", "IsoForestModel", "IsotonicMap",
    "OcSvmConfig", "OcSvmModel", "OneClassHead", "calibrate", "fit_gmm", "fit_head",
    "fit_isolation_forest", "fit_isotonic", "fit_ocsvm", "gmm_logpdf", "load_head",
    "predict_one_class", "save_head", "score_if", "score_ocsvm", "with_calibration",
]
