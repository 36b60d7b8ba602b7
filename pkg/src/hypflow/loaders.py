"""Initial data families and profile files."""
import logging
import re
from pathlib import Path

import numpy as np
import scipy.special

from .ambient import AmbientSpace, DomainError, make_ambient
from .geometry import RadialProfile, reduced_grid


PROFILE_HEADER = '# hypflow-profile v1 field={field} n={n} nodes={nodes}'
_HEADER_PATTERN = re.compile(r'^#\s*hypflow-profile\s+v1\s+field=(?P<field>[RCH])\s+n=(?P<n>\d+)\s+nodes=(?P<nodes>\d+)\s*$')

FAMILIES = ('constant', 'cosk', 'legendre', 'offcenter', 'file')


def constant(theta, tau: float):
    return np.full_like(theta, float(tau))


def cosk(theta, tau: float, eps: float, k: int):
    """rho = tau + eps cos(k theta)."""
    return tau + eps * np.cos(k * theta)


def legendre(theta, tau: float, eps: float, l: int):
    """rho = tau + eps P_l(cos theta)."""
    return tau + eps * scipy.special.eval_legendre(l, np.cos(theta))


def offcenter(theta, tau: float, shift: float):
    """Radial function of the geodesic sphere of radius tau centered at distance shift along theta = 0.

    Solves cosh(rho) cosh(d) - sinh(rho) sinh(d) cos(theta) = cosh(tau) for u = e^rho.
    """
    if not 0 <= shift < tau:
        raise DomainError(f'offcenter needs 0 <= shift < tau, got shift={shift}, tau={tau}.')
    A = np.cosh(shift)
    B = np.sinh(shift) * np.cos(theta)
    C = np.cosh(tau)
    u = (C + np.sqrt(C**2 - (A**2 - B**2))) / (A - B)
    return np.log(u)


def initial_profile(amb: AmbientSpace, family: str, nodes: int = 512, tau: float = 1.0,
                    eps: float = 0.0, mode: int = 2, shift: float = 0.0, path=None) -> RadialProfile:
    """Build the initial radial profile of a run.

    Args:
        amb (AmbientSpace): ambient space.
        family (str): one of 'constant', 'cosk', 'legendre', 'offcenter', 'file'.
        nodes (int, optional): grid nodes. Defaults to 512.
        tau (float, optional): base radius. Defaults to 1.0.
        eps (float, optional): perturbation amplitude. Defaults to 0.0.
        mode (int, optional): k for cosk, l for legendre. Defaults to 2.
        shift (float, optional): center offset for offcenter. Defaults to 0.0.
        path (str, optional): profile file for 'file'. Defaults to None.

    Returns:
        RadialProfile
    """
    if family == 'file':
        if path is None:
            raise ValueError("Family 'file' needs a path.")
        return load_profile(path, amb=amb, nodes=nodes)
    theta = reduced_grid(nodes)
    if family == 'constant':
        rho = constant(theta, tau)
    elif family == 'cosk':
        rho = cosk(theta, tau, eps, mode)
    elif family == 'legendre':
        rho = legendre(theta, tau, eps, mode)
    elif family == 'offcenter':
        if amb.field_kind != 'R':
            raise DomainError(f'offcenter spheres are not S^{amb.a}-invariant in {amb}.')
        rho = offcenter(theta, tau, shift)
    else:
        raise ValueError(f'Unknown initial data family {family!r}. Known: {FAMILIES}.')
    logging.info(f'Initial data {family} on {amb}: rho in [{np.min(rho):.6f}, {np.max(rho):.6f}], {nodes} nodes.')
    return RadialProfile(amb, theta, rho)


def save_profile(filepath, profile: RadialProfile):
    """Write a two column (theta, rho) table with a hypflow-profile header."""
    amb = profile.amb
    header = PROFILE_HEADER.format(field=amb.field_kind, n=amb.n, nodes=profile.nodes)
    with open(filepath, 'w') as f:
        f.write(header + '\n')
        np.savetxt(f, np.column_stack((profile.theta, profile.rho)), fmt='%.17e')
    logging.info(f'Profile saved to {filepath}.')


def load_profile(filepath, amb: AmbientSpace = None, nodes: int = None) -> RadialProfile:
    """Read a profile written by save_profile.

    Args:
        filepath (str): profile file.
        amb (AmbientSpace, optional): expected ambient space; checked against the header if given.
        nodes (int, optional): expected node count; checked against the header if given.

    Returns:
        RadialProfile
    """
    filepath = Path(filepath)
    with open(filepath, 'r') as f:
        first_line = f.readline().strip()
    match = _HEADER_PATTERN.match(first_line)
    if match is None:
        raise ValueError(f'{filepath} has no hypflow-profile header: {first_line!r}.')
    file_amb = make_ambient(match['field'], int(match['n']))
    file_nodes = int(match['nodes'])
    if amb is not None and amb != file_amb:
        raise ValueError(f'{filepath} holds a profile on {file_amb}, expected {amb}.')
    if nodes is not None and nodes != file_nodes:
        raise ValueError(f'{filepath} has {file_nodes} nodes, expected {nodes}.')
    table = np.loadtxt(filepath, comments='#', ndmin=2)
    if table.shape != (file_nodes, 2):
        raise ValueError(f'{filepath}: expected {file_nodes} rows of (theta, rho), got shape {table.shape}.')
    return RadialProfile(file_amb, table[:, 0], table[:, 1])
