"""Built-in example models, emitted in the JSON model format."""

from __future__ import annotations

import math

import numpy as np

from .modelfile import SCHEMA_VERSION, encode_complex, encode_matrix, encode_vector

R2 = 1 / math.sqrt(2)


def mach_zehnder_atom() -> dict:
    """Atom with two metastable levels in the lower arm of a Mach-Zehnder interferometer.

    Box arm basis ``[l+, l-]``, reference arm ``[u+, u-]``, object ``[m+, m-]``.
    A ``+`` photon is absorbed by ``m+`` and a ``-`` photon by ``m-``; the
    surviving terms are ``|l+ m-><l+ m-| + |l- m+><l- m+|``.
    """
    D = np.zeros((4, 4))
    D[0 * 2 + 1, 0 * 2 + 1] = 1.0
    D[1 * 2 + 0, 1 * 2 + 0] = 1.0
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "mach-zehnder-atom",
        "description": "x-polarised photon probing a two-level metastable atom in the lower arm; "
                       "box arm [l+, l-], reference arm [u+, u-], object [m+, m-].",
        "layout": {"n": 2, "m": 2, "m_r": 2},
        "dynamics": {"kind": "direct_D", "D": encode_matrix(D)},
        "probe": {"psi_r": encode_vector([R2, R2]), "alpha": encode_complex(R2)},
    }


def absorber() -> dict:
    """Perfect absorber: every box-arm amplitude is lost to decay."""
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "absorber",
        "description": "Single-path box arm with a perfectly absorbing object (D = 0).",
        "layout": {"n": 1, "m": 1, "m_r": 1},
        "dynamics": {"kind": "direct_D", "D": encode_matrix(np.zeros((1, 1)))},
        "probe": {"psi_r": encode_vector([1.0]), "alpha": encode_complex(R2)},
    }


def identity() -> dict:
    """No coupling: free dynamics only, so the object leaves no trace on the probe."""
    H_S = np.diag([0.0, 1.0])
    H_D = np.diag([0.0, 0.5, 0.25, 0.75])
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "identity",
        "description": "Vanishing interaction Hamiltonian with nontrivial free evolution.",
        "layout": {"n": 2, "m": 2, "m_r": 2},
        "dynamics": {
            "kind": "hamiltonian_schedule",
            "segments": [{
                "H_S": encode_matrix(H_S),
                "H_D": encode_matrix(H_D),
                "H_I": encode_matrix(np.zeros((4, 4))),
                "duration": 1.0,
            }],
        },
        "probe": {"psi_r": encode_vector([R2, R2]), "alpha": encode_complex(R2)},
    }


EXAMPLES = {
    "mach-zehnder-atom": mach_zehnder_atom,
    "absorber": absorber,
    "identity": identity,
}
