"""Power-system models: network, classical and detailed machines, events."""
from .classical import classical_rhs, classical_spec, electrical_power
from .detailed import (detailed_rhs, detailed_spec, init_detailed_machine, network_outputs,
                       rotate_to_machine, rotate_to_network)
from .events import Event, EventSchedule
from .machines import ClassicalMachineParams, DetailedMachineParams, InitError
from .network import (Branch, Bus, CaseError, Generator, NetworkCase, PowerFlowError, ReductionError,
                      TopologyError, build_admittance, bundled_case, kron_reduce, load_case,
                      power_flow_nr)
from .system import LimiterSwitch, PowerSystem, init_equilibrium

__all__ = [
    "Branch", "Bus", "CaseError", "ClassicalMachineParams", "DetailedMachineParams", "Event",
    "EventSchedule", "Generator", "InitError", "LimiterSwitch", "NetworkCase", "PowerFlowError",
    "PowerSystem", "ReductionError", "TopologyError", "build_admittance", "bundled_case",
    "classical_rhs", "classical_spec", "detailed_rhs", "detailed_spec", "electrical_power",
    "init_detailed_machine", "init_equilibrium", "kron_reduce", "load_case", "network_outputs",
    "power_flow_nr", "rotate_to_machine", "rotate_to_network",
]
