from .adversaries import LABELS, Adversary, BrakeToStop, Hybrid, Learned, Predictive, Steady, make_adversary
from .system import DEFAULT_K, VehicleSystem, failure_rate, uniform_inits, vehicle_failure, vehicle_oss
from .world import (VehicleParams, VehicleWorld, idm_accel, init_world, mobil_decision, subject_act,
                    world_step)

__all__ = [
    "LABELS", "Adversary", "BrakeToStop", "Hybrid", "Learned", "Predictive", "Steady", "make_adversary",
    "DEFAULT_K", "VehicleSystem", "failure_rate", "uniform_inits", "vehicle_failure", "vehicle_oss",
    "VehicleParams", "VehicleWorld", "idm_accel", "init_world", "mobil_decision", "subject_act", "world_step",
]
