"""Pareto front tracing for smooth bi-criteria problems by integrating the
weighted-sum optimality ODE with explicit Runge-Kutta methods."""
from .core import (BiCriteriaProblem, CriticalityReport, FunctionProblem,
                   InputError, criticality, scalarized_gradient,
                   scalarized_hessian, scalarized_value)
from .init import DescentConfig, armijo_descent, lambda_for_critical
from .integrate import (ButcherTableau, ParetoTrace, TraceConfig, TraceRecord,
                        builtin_tableaus, empirical_order, rk_step, trace,
                        trace_bidirectional)
from .ode_rhs import (LostDefinitenessError, gronwall_bound, lambda_sensitivity,
                      lipschitz_estimates, min_eigenvalue, rhs)
from .quadratic import (QuadraticProblem, analytic_solution, qp_rhs_closed_form,
                        random_qp)

__version__ = "0.1.0"
