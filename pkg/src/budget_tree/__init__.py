"""Budgeted classification with learned sensor-acquisition trees."""

from .data import BasisConfig, Dataset, Scaler, Sensor, SensorSpec, Split, load_dataset, load_sensors
from .lp import DecisionFunctions, train_decisions
from .pipeline import RunConfig, fit_system, prepare, sweep_alpha
from .policy import BudgetCurve, DecisionSystem, EvalRecord, MyopicPolicy, evaluate
from .risk import SavingsMatrix, build_weights, max_form_risk, product_risk, surrogate_risk
from .subsets import greedy_select
from .tree import TreeStructure, cluster_tree

__version__ = "0.1.0"
