from .interval import Interval
from .verify import VerificationSpec, VerificationReport, interval_eval, interval_eval_dVdot, dvdot_points, verify, \
    soundness_check, save_report
from .smt import export_smt_query
