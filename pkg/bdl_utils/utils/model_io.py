"""
Versioned single-file storage of trained models.

The file is plain ``key = value`` text (see :class:`KeyValueFile`) holding the architecture, the
proxy posterior, the noise precision, the input standardization and the run configuration.
Floats are written as their shortest round-trip representation, so saving a loaded model
reproduces the original bytes.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from bdl_utils.analysis.datasets import DataError, StandardizationRecord
from bdl_utils.inference.variational import VariationalState
from bdl_utils.model.network import NetworkSpec, param_count
from bdl_utils.utils.config_parser import KeyValueFile, ParseError, RunConfig

FORMAT_TAG = 'bdl-model'
FORMAT_VERSION = 1
_CONFIG_PREFIX = 'config.'


@dataclass
class TrainedModel:
    """
    Everything needed to predict with a trained network.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.
    state : VariationalState
        The proxy posterior. Point estimates are stored as a degenerate state with zero spread.
    config : RunConfig
        The configuration the model was trained with.
    standardization : StandardizationRecord, Optional
        Applied to every input before the network.
    deterministic : bool
        True for maximum-likelihood models.
    tau_flagged : bool
        True if the noise precision is the ``inf`` sentinel of a perfect fit.
    """
    spec: NetworkSpec
    state: VariationalState
    config: RunConfig = field(default_factory=RunConfig)
    standardization: Optional[StandardizationRecord] = None
    deterministic: bool = False
    tau_flagged: bool = False

    @property
    def task(self):
        return self.config.task

    def prepare_inputs(self, X):
        X = np.asarray(X, dtype=float)
        return X if self.standardization is None else self.standardization.apply(X)


def _as_list(value):
    return value if isinstance(value, list) else [value]


def to_keyvalue(model):
    kv = KeyValueFile()
    kv['C0001'] = 'bdl_utils model file'
    kv['format'] = FORMAT_TAG
    kv['version'] = FORMAT_VERSION
    kv['widths'] = list(model.spec.widths)
    kv['activations'] = ' '.join(model.spec.activations)
    kv['deterministic'] = model.deterministic
    kv['tau_eps'] = float(model.state.tau_eps)
    kv['tau_flagged'] = model.tau_flagged
    kv['n_params'] = model.state.n_params
    kv['mu'] = [float(v) for v in np.asarray(model.state.mu)]
    kv['rho'] = [float(v) for v in np.asarray(model.state.rho)]
    if model.standardization is not None:
        kv['std_mean'] = [float(v) for v in model.standardization.mean]
        kv['std_scale'] = [float(v) for v in model.standardization.std]
        kv['std_constant'] = [int(v) for v in model.standardization.constant]
    kv['B0001'] = ''
    kv['C0002'] = 'run configuration'
    for k, v in model.config.to_keyvalue().items():
        kv[_CONFIG_PREFIX + k] = v
    return kv


def save_model(model, path):
    """Writes a model file. Returns the path."""
    with open(path, 'w') as f:
        f.write(to_keyvalue(model).dumps())
    return path


def load_model(path):
    """
    Reads a model file.

    Raises
    ------
    DataError
        If the file is missing, malformed, of another format or version, or inconsistent.
    """
    try:
        kv = KeyValueFile(path)
    except (OSError, ParseError) as err:
        raise DataError(f"Could not read model file {path!r}: {err}") from err
    params = kv.parameters()
    if params.get('format') != FORMAT_TAG:
        raise DataError(f"{path!r} is not a bdl model file")
    if params.get('version') != FORMAT_VERSION:
        raise DataError(f"{path!r}: unsupported model file version {params.get('version')!r}")
    try:
        spec = NetworkSpec(_as_list(params['widths']), str(params['activations']).split())
        mu = np.array(_as_list(params['mu']), dtype=float)
        rho = np.array(_as_list(params['rho']), dtype=float)
        if mu.shape[0] != param_count(spec) or int(params['n_params']) != mu.shape[0]:
            raise DataError(f"{path!r}: {mu.shape[0]} parameters stored, the architecture needs {param_count(spec)}")
        state = VariationalState(mu, rho, float(params['tau_eps']))
        standardization = None
        if 'std_mean' in params:
            standardization = StandardizationRecord(
                mean=np.array(_as_list(params['std_mean']), dtype=float),
                std=np.array(_as_list(params['std_scale']), dtype=float),
                constant=np.array(_as_list(params['std_constant']), dtype=int).astype(bool),
            )
        config_items = {
            k[len(_CONFIG_PREFIX):]: v for k, v in params.items() if k.startswith(_CONFIG_PREFIX)
        }
        config = RunConfig().merge(config_items, source=path)
        return TrainedModel(
            spec=spec,
            state=state,
            config=config,
            standardization=standardization,
            deterministic=params['deterministic'] == 'yes',
            tau_flagged=params['tau_flagged'] == 'yes',
        )
    except KeyError as err:
        raise DataError(f"{path!r}: missing entry {err.args[0]!r}") from None
    except ValueError as err:
        raise DataError(f"{path!r}: {err}") from err
