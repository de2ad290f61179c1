import dataclasses

import numpy as np
import pytest

from dtsim.power import (DetailedMachineParams, NetworkCase, PowerSystem, bundled_case,
                         detailed_spec, init_detailed_machine)


def smib_case_dict(p_gen=0.8, x_line=0.3, H=3.5, D=0.0, xd_tr=0.2, v_gen=1.0):
    """One classical machine feeding an infinite bus through a reactance."""
    return {
        "name": "smib",
        "buses": [{"id": 1, "type": "slack", "v": 1.0},
                  {"id": 2, "type": "PV", "v": v_gen, "p_gen": p_gen}],
        "branches": [{"from": 1, "to": 2, "r": 0.0, "x": x_line}],
        "generators": [{"id": "inf", "bus": 1, "infinite": True},
                       {"id": "G", "bus": 2, "machine": "G"}],
        "machines": {"classical": [{"id": "G", "H": H, "xd_tr": xd_tr, "D": D}]},
    }


def two_machine_case_dict(p_gen=0.5, D=0.0):
    """Two classical machines, lossless tie line, no loads."""
    return {
        "name": "two-machine",
        "buses": [{"id": 1, "type": "slack", "v": 1.0},
                  {"id": 2, "type": "PV", "v": 1.0, "p_gen": p_gen}],
        "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 0.2}],
        "generators": [{"id": "A", "bus": 1, "machine": "A"}, {"id": "B", "bus": 2, "machine": "B"}],
        "machines": {"classical": [{"id": "A", "H": 5.0, "xd_tr": 0.15, "D": D},
                                   {"id": "B", "H": 3.0, "xd_tr": 0.25, "D": D}]},
    }


@pytest.fixture
def smib_case():
    return NetworkCase.from_dict(smib_case_dict())


@pytest.fixture
def smib_system(smib_case):
    return PowerSystem(smib_case, "classical")


@pytest.fixture(scope="session")
def ieee9():
    return bundled_case("ieee9")


def detailed_smib(x_line=0.3, v_term=1.02 * np.exp(0.25j), v_bus=1.0 + 0j, **overrides):
    """Detailed machine G2 of the bundled case tied to a fixed bus, at equilibrium.

    Returns ``(params, x0, spec_args)`` where ``spec_args`` holds the 1x1
    reduced admittance and the fixed-bus current injection.
    """
    case = bundled_case("ieee9")
    p = DetailedMachineParams.from_dict(case.machine_params("detailed", "G2"))
    p = dataclasses.replace(p, **overrides)
    current = (v_term - v_bus) / (1j * x_line)
    x0, p = init_detailed_machine(p, v_term, current)
    z = complex(p.ra, p.xd_sub) + 1j * x_line
    return p, x0, {"Y_r": np.array([[1 / z]]), "fixed_current": np.array([-v_bus / z])}


def detailed_smib_spec(p, spec_args, modes=None, x=None):
    return detailed_spec([p], spec_args["Y_r"], modes, fixed_current=spec_args["fixed_current"], x=x)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance_record():
    def record(number, title, ok, detail):
        _ACCEPTANCE[number] = (title, ok, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {number:2d} {title}: {detail}")
