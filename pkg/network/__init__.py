from .network import Activation, ValueNet, AnalyticNet, init_random, to_record, from_record, save_net, load_net
from .policy import policy, policy_jacobian_origin, Policy, LinearPolicy, FeedbackPolicy, FunctionPolicy
from .ghjb import ResidualSample, closed_loop_data, ghjb_residual, hjb_residual
from .loss import LossBreakdown, ParamGradient, PolicyEvaluationLoss, loss, loss_gradient
