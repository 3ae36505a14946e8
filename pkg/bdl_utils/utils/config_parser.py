import os
import re
import dataclasses
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional

from bdl_utils.data import preset_path
from bdl_utils.model.network import NetworkSpec
from bdl_utils.model.priors import parse_prior
from bdl_utils.inference.optimizer import LRSchedule, TrainConfig
from bdl_utils.inference.variational import SIGMA_INIT


class ParseError(Exception):
    """Error raised during parsing a file."""


class ConfigError(ValueError):
    """Error raised for unknown keys or invalid values in a run configuration."""


class KeyValueFile(OrderedDict):
    """
    A flat ``key = value`` text file. Note that a KeyValueFile instance is an ordered dictionary,
    with the i-th key corresponding to the i-th line in the file. Comments and blank lines are
    also preserved, e.g., with keys 'C0001' and 'B0001', respectively. The value corresponding to a
    'C' key is the comment itself, while the value corresponding to a 'B' key is an empty string.
    Comments start with ``;`` or ``#``. A comment after a parameter on the same line must be preceded by
    whitespace and is discarded, so values such as paths may contain both characters.
    Leading and trailing spaces are always stripped.

    Parameters
    ----------
    input_file : str, Optional
        The path of the input file. The default is None.
    **kwargs : Optional
        Additional key-value pairs. No sanity checks are performed on them.

    Attributes
    ----------
    COMMENT : :code:`re.Pattern` object
        A compiled regular expression pattern for comment lines.
    PARAMETER : :code:`re.Pattern` object
        A compiled regular expression pattern for parameter lines.
    input_file : str
        The real path of the input file.

    Example
    -------
    >>> KeyValueFile("xsinx-paper.cfg")
    KeyValueFile([('C0001', 'x sin(x) regression'), ('task', 'regression'), ('widths', [1, 20, 1]), ...])
    """
    COMMENT = re.compile(r"""\s*[;#]\s*(?P<value>.*)""")
    PARAMETER = re.compile(r"""\s*(?P<parameter>[^=]+?)\s*=\s*(?P<value>.*?)(?P<comment>\s+[;#].*)?""")

    def __init__(self, input_file=None, **kwargs):
        super(KeyValueFile, self).__init__(**kwargs)
        if input_file is not None:
            self.input_file = os.path.realpath(input_file)
            self.read()

    @staticmethod
    def _convert_to_numeric(s):
        """
        Converts the input to a numerical type when possible.

        Parameters
        ----------
        s : any
            Usually a :code:`str`; anything else is returned as is.

        Returns
        -------
        numerical : any
            An :code:`int` or :code:`float` if :code:`s` holds one number, a list if it holds
            several, and :code:`s` itself (stripped) otherwise.
        """
        if type(s) is not str:
            return s
        tokens = s.split()
        for converter in int, float:  # increasing order of lenience
            try:
                values = [converter(i) for i in tokens]
            except ValueError:
                continue
            if len(values) == 0:
                return ''
            return values[0] if len(values) == 1 else values
        return s.strip()

    def read(self):
        """
        Reads and parses the input file.
        """
        def BLANK(i):
            return f"B{i:04d}"

        def COMMENT(i):
            return f"C{i:04d}"

        entries = OrderedDict()
        iblank = icomment = 0
        with open(self.input_file) as f:
            for line in f:
                line = line.strip()
                if len(line) == 0:
                    iblank += 1
                    entries[BLANK(iblank)] = ""
                    continue
                m = self.COMMENT.fullmatch(line)
                if m:
                    icomment += 1
                    entries[COMMENT(icomment)] = m.group("value")
                    continue

                m = self.PARAMETER.fullmatch(line)
                if m:
                    entries[m.group("parameter")] = self._convert_to_numeric(m.group("value"))
                else:
                    raise ParseError(f"{os.path.basename(self.input_file)!r}: unknown line, {line!r}")

        super(KeyValueFile, self).update(entries)

    def parameters(self):
        """The ``key -> value`` pairs, without comments and blank lines."""
        return OrderedDict((k, v) for k, v in self.items() if not _is_layout_key(k))

    def dumps(self):
        lines = []
        for k, v in self.items():
            if _is_layout_key(k) and k[0] == "B":
                lines.append("")
            elif _is_layout_key(k):
                lines.append(f"; {v!s}")
            elif isinstance(v, str) or not hasattr(v, "__iter__"):
                lines.append(f"{k!s} = {_format_value(v)}")
            else:
                lines.append(f"{k} = {' '.join(_format_value(i) for i in v)}")
        return "\n".join(lines) + "\n"

    def write(self, output_file=None):
        """
        Writes the instance to a file.

        Parameters
        ----------
        output_file : str, Optional
            The output path. The default is the file the instance was read from.
        """
        if output_file is None:
            output_file = self.input_file
        with open(output_file, "w") as f:
            f.write(self.dumps())


_LAYOUT_KEY = re.compile(r"[BC]\d{4}")


def _is_layout_key(k):
    return bool(_LAYOUT_KEY.fullmatch(k))


def _format_value(v):
    # repr of a float is the shortest string that reads back to the same value.
    if isinstance(v, bool):
        return 'yes' if v else 'no'
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TRUE, _FALSE = ('yes', 'true', 'on', '1'), ('no', 'false', 'off', '0')


def _coerce(name, kind, value):
    try:
        if kind is bool:
            text = str(value).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError
        if kind in (int, float, str):
            if isinstance(value, list):
                raise ValueError
            if kind is int and isinstance(value, float) and not value.is_integer():
                raise ValueError
            return kind(value)
        if kind in (List[int], List[float]):
            item = int if kind == List[int] else float
            values = value if isinstance(value, list) else [value]
            if item is int and any(isinstance(v, float) and not v.is_integer() for v in values):
                raise ValueError
            return [item(v) for v in values]
        if kind == Optional[str]:
            return None if value in (None, '', 'none') else str(value)
    except (ValueError, TypeError):
        pass
    raise ConfigError(f"Invalid value {value!r} for {name!r}")


@dataclass
class RunConfig:
    """
    Every setting of a generate/train/predict/benchmark run.

    Values are resolved in the order dataclass defaults, named preset, configuration file and
    explicit command-line flags; later sources win. Keys of presets and files must match the
    field names exactly.
    """
    task: str = 'regression'
    widths: List[int] = field(default_factory=lambda: [1, 20, 1])
    hidden: str = 'tanh'
    output: str = 'identity'
    prior: str = 'gaussian(0,1)'
    epochs: int = 1000
    warm_start: int = 0
    batch_size: int = 30
    n_samples: int = 1
    lr: float = 0.001
    lr_decay: float = 1.0
    lr_interval: int = 0
    tau_eps: float = 1.0
    tau_refresh: bool = False
    sigma_init: float = SIGMA_INIT
    train_fraction: float = 1.0
    standardize: bool = False
    test_frequency: int = 0
    test_draws: int = 100
    log_every: int = 100
    k: int = 1000
    levels: List[float] = field(default_factory=lambda: [0.95])
    seed: int = 0
    data: Optional[str] = None
    out: Optional[str] = None

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def merge(self, mapping, source='input'):
        """
        Returns a copy with the entries of ``mapping`` applied.

        Raises
        ------
        ConfigError
            If a key is not a field name or a value has the wrong type.
        """
        types = {f.name: f.type for f in dataclasses.fields(self)}
        unknown = [k for k in mapping if k not in types]
        if unknown:
            raise ConfigError(f"Unknown key(s) in {source}: {', '.join(unknown)}. Valid keys: {', '.join(types)}.")
        updates = {k: _coerce(k, types[k], v) for k, v in mapping.items()}
        return dataclasses.replace(self, **updates)

    @classmethod
    def from_file(cls, path, base=None):
        if not os.path.isfile(path):
            raise ConfigError(f"Configuration file not found: {path}")
        base = cls() if base is None else base
        return base.merge(KeyValueFile(path).parameters(), source=os.path.basename(path))

    @classmethod
    def resolve(cls, preset=None, config=None, overrides=None):
        """
        Builds and validates a configuration.

        Parameters
        ----------
        preset : str, Optional
            Name of a packaged preset, e.g. ``xsinx-paper``.
        config : str, Optional
            Path of a configuration file.
        overrides : dict, Optional
            Explicit settings; None values are ignored.
        """
        cfg = cls()
        if preset is not None:
            cfg = cls.from_file(preset_path(preset), base=cfg)
        if config is not None:
            cfg = cls.from_file(config, base=cfg)
        if overrides:
            cfg = cfg.merge({k: v for k, v in overrides.items() if v is not None}, source='command line')
        return cfg.validate()

    def validate(self):
        if self.task not in ('regression', 'classification'):
            raise ConfigError(f"Unknown task {self.task!r}. Supported: regression, classification.")
        try:
            spec = self.network_spec()
            parse_prior(self.prior)
            self.train_config().validate()
        except ValueError as err:
            raise ConfigError(str(err)) from err
        if self.task == 'classification' and spec.n_outputs < 2:
            raise ConfigError("Classification needs at least two outputs")
        if not 0 < self.train_fraction <= 1:
            raise ConfigError(f"train_fraction must lie in (0, 1], got {self.train_fraction}")
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if any(not 0 < level < 1 for level in self.levels):
            raise ConfigError(f"Credible levels must lie in (0, 1), got {self.levels}")
        return self

    @property
    def deterministic(self):
        return parse_prior(self.prior) is None

    def network_spec(self):
        return NetworkSpec.build(self.widths, self.hidden, self.output)

    def prior_spec(self):
        return parse_prior(self.prior)

    def train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            n_samples=self.n_samples,
            schedule=LRSchedule(self.lr, self.lr_decay, self.lr_interval),
            seed=self.seed,
            task=self.task,
            tau_eps=self.tau_eps,
            prior=self.prior,
            tau_refresh=self.tau_refresh,
            warm_start=self.warm_start,
            sigma_init=self.sigma_init,
            test_frequency=self.test_frequency,
            test_draws=self.test_draws,
            log_every=self.log_every,
        )

    def to_keyvalue(self):
        """The settings as a :class:`KeyValueFile`; unset paths are left out."""
        kv = KeyValueFile()
        for k in self.keys():
            v = getattr(self, k)
            if v is not None:
                kv[k] = v
        return kv
