"""Self-documenting xarray datasets of flow trajectories."""
import logging
from pathlib import Path

import numpy as np
import xarray as xr
import zarr


CSV_COLUMNS = ['t', 'area', 'V_norm', 'sup_grad_phi_sq', 'sup_H_dev', 'min_H', 'max_pc',
               'norm_d2phi', 'norm_d3phi', 'mass', 'rho_min', 'rho_max', 'dt']

SERIES = {'area': ('Area |M_t| of the hypersurface.', 'length^m'),
          'V_norm': ('Normalized area |M_t| exp(-(m+a) t / psi(m+a)).', 'length^m'),
          'sup_grad_phi_sq': ('max over nodes of |grad phi|^2 on the round sphere.', ''),
          'sup_H_dev': ('max over nodes of |H - (m+a)|.', '1/length'),
          'min_H': ('min over nodes of the mean curvature H.', '1/length'),
          'max_pc': ('max over nodes and directions of the principal curvatures.', '1/length'),
          'norm_d2phi': ('max over nodes of |second derivative of phi|.', ''),
          'norm_d3phi': ('max over nodes of |third derivative of phi|.', ''),
          'mass': ('Modified Hawking mass (K=R) or Brown-York-like mass (K!=R).', ''),
          'rho_min': ('min over nodes of the radial function.', 'length'),
          'rho_max': ('max over nodes of the radial function.', 'length'),
          'sup_traceless_sq': ('max over nodes of the squared traceless second fundamental form.', '1/length^2'),
          'sup_horizontal_dev_sq': ('max over nodes and horizontal directions of (h - 1)^2.', '1/length^2'),
          'sup_vertical_dev_sq': ('max over nodes and vertical directions of (h - 2)^2.', '1/length^2'),
          'dt': ('Step size of the accepted step that produced the sample.', 'time')}


class Recorder:
    """Collects sampled flow states and hook values during a run.

    Args:
        theta (np.ndarray): reduced grid.
        hooks (dict): name -> callable(state) returning a float.
    """

    def __init__(self, theta, hooks):
        self.theta = np.asarray(theta)
        self.hooks = dict(hooks)
        self.times = []
        self.rho = []
        self.phi = []
        self.dt = []
        self.series = {name: [] for name in self.hooks}

    def __len__(self):
        return len(self.times)

    def record(self, state, dt: float):
        self.times.append(state.t)
        self.rho.append(np.array(state.profile.rho))
        self.phi.append(np.array(state.fields.phi))
        self.dt.append(dt)
        for name, hook in self.hooks.items():
            self.series[name].append(float(hook(state)))
        logging.debug(f'Sample {len(self.times)} at t={state.t:.6g}.')

    def to_dataset(self, attrs=None) -> xr.Dataset:
        return assemble(self.times, self.theta, self.rho, self.phi, self.dt, self.series, attrs)


def assemble(times, theta, rho, phi, dt, series=None, attrs=None) -> xr.Dataset:
    """Bundle sampled states and scalar series into a trajectory dataset.

    Args:
        times (list): strictly increasing sample times.
        theta (np.ndarray): reduced grid.
        rho (list): radial function per sample.
        phi (list): phi per sample.
        dt (list): step size per sample.
        series (dict, optional): name -> list of floats, one per sample. Defaults to None.
        attrs (dict, optional): dataset attributes (field, n, a, m, speed, nodes, cadence). Defaults to None.

    Returns:
        xarray.Dataset: dims (time, theta).
    """
    times = np.asarray(times, dtype=float)
    if times.size and np.any(np.diff(times) <= 0):
        raise ValueError('Sample times must be strictly increasing.')
    coords = {'time': times, 'theta': np.asarray(theta, dtype=float)}
    dataset_data = dict()
    dataset_data['rho'] = xr.DataArray(np.asarray(rho, dtype=float).reshape(times.size, -1),
                                       dims=['time', 'theta'], coords=coords,
                                       attrs={'description': 'Radial function rho(theta).',
                                              'units': 'length'})
    dataset_data['phi'] = xr.DataArray(np.asarray(phi, dtype=float).reshape(times.size, -1),
                                       dims=['time', 'theta'], coords=coords,
                                       attrs={'description': 'phi = ln tanh(rho/2).',
                                              'units': ''})
    all_series = dict(series or {})
    all_series['dt'] = dt
    for name, values in all_series.items():
        values = np.asarray(values, dtype=float)
        if values.shape != times.shape:
            raise ValueError(f'Series {name} has {values.size} values for {times.size} samples.')
        description, units = SERIES.get(name, (name, ''))
        dataset_data[name] = xr.DataArray(values, dims=['time'], coords={'time': times},
                                          attrs={'description': description, 'units': units})
    return xr.Dataset(dataset_data, attrs=dict(attrs or {}))


def sample_index(traj: xr.Dataset, t: float) -> int:
    """Index of the sample closest to time t."""
    return int(np.argmin(np.abs(traj.time.values - t)))


def save(savepath, traj: xr.Dataset):
    """Save trajectory to a zipped zarr store."""
    with zarr.ZipStore(str(savepath), mode='w') as zarr_store:
        traj.to_zarr(store=zarr_store, compute=True)
    logging.info(f'Trajectory saved to {savepath}.')


def load(savepath, lazy: bool = False) -> xr.Dataset:
    """Load a trajectory saved with save.

    Args:
        savepath (str): zipped zarr store.
        lazy (bool, optional): keep arrays on disk (dask backed). Defaults to False.

    Returns:
        xarray.Dataset
    """
    zarr_store = zarr.ZipStore(str(savepath), mode='r')
    dataset = xr.open_zarr(zarr_store)
    if not lazy:
        dataset.load()
        zarr_store.close()
    return dataset


def to_csv(traj: xr.Dataset, savepath):
    """Write the scalar series as CSV with a fixed header and %.12e values."""
    columns = [traj.time.values]
    for name in CSV_COLUMNS[1:]:
        if name in traj:
            columns.append(traj[name].values)
        else:
            logging.warning(f'Series {name} not recorded, writing nan.')
            columns.append(np.full(traj.time.size, np.nan))
    np.savetxt(Path(savepath), np.column_stack(columns), fmt='%.12e', delimiter=',',
               header=','.join(CSV_COLUMNS), comments='')
    logging.info(f'Time series written to {savepath}.')
