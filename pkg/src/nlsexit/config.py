"""``key = value`` run configuration with validation before any compute."""

from pathlib import Path

from .observables import critical_index

__all__ = ["ConfigError", "KEYS", "DEFAULTS", "parse_config_text", "load_config", "merge", "validate"]


class ConfigError(ValueError):
    pass


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ladder(s):
    if isinstance(s, (list, tuple)):
        return tuple(float(x) for x in s)
    return tuple(float(x) for x in str(s).split(",") if x.strip())


# key -> (parser, help)
KEYS = {
    "dim": (int, "spatial dimension: 1 (line) or 3 (radial)"),
    "p": (float, "nonlinearity power; (dim, p) must be intercritical"),
    "L": (float, "domain half-width (dim=1) or ball radius (dim=3)"),
    "N": (int, "grid nodes; power of two >= 256 for dim=1"),
    "tol": (float, "ground-state iteration tolerance (>= 1e-14)"),
    "dt": (float, "time step, 0 < dt <= 0.1"),
    "tend": (float, "final time for evolve"),
    "stride": (int, "snapshot every this many steps (0: endpoints only)"),
    "eta": (float, "exit radius in (0, 0.1]"),
    "ladder": (_ladder, "comma-separated strictly decreasing a values"),
    "T_max": (float, "give up on an exit run past this |t|"),
    "seed": (int, "seed of the coercivity probe"),
    "trials": (int, "coercivity probe trials (>= 100)"),
    "workers": (int, "sweep worker processes (default: available cores)"),
    "pin_translation": (_bool, "fit only the phase for even data"),
    "backward": (_bool, "also run each exit experiment backward in time"),
}

DEFAULTS = {
    "dim": 1,
    "p": 7.0,
    "L": 20.0,
    "N": 2048,
    "tol": 1e-13,
    "dt": 5e-4,
    "tend": 1.0,
    "stride": 0,
    "eta": 0.05,
    "ladder": (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5),
    "T_max": 40.0,
    "seed": 0,
    "trials": 200,
    "workers": None,
    "pin_translation": True,
    "backward": True,
}


def _coerce(key, raw, origin):
    if key not in KEYS:
        raise ConfigError(f"{origin}: unknown key {key!r}; known keys: {', '.join(KEYS)}")
    try:
        return KEYS[key][0](raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{origin}: cannot parse {key} = {raw!r} ({KEYS[key][1]})") from None


def parse_config_text(text: str, origin: str = "config") -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, raw, f"{origin}:{n}")
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: not UTF-8 text") from None
    return parse_config_text(text, str(path))


def merge(file_values: dict, flags: dict) -> dict:
    """Defaults, then file values, then flags that were actually given."""
    cfg = dict(DEFAULTS)
    cfg.update(file_values)
    for k, v in flags.items():
        if v is not None:
            cfg[k] = _coerce(k, v, "flag") if isinstance(v, str) else v
    return validate(cfg)


def validate(cfg: dict) -> dict:
    dim, p = cfg["dim"], cfg["p"]
    if dim not in (1, 3):
        raise ConfigError(f"dim = {dim}: use 1 or 3")
    s_c = critical_index(dim, p)
    if not 0 < s_c < 1:
        raise ConfigError(f"(dim, p) = ({dim}, {p:g}) gives s_c = {s_c:.6g}; need 0 < s_c < 1 (for dim=1 take p > 5)")
    if not cfg["L"] > 0:
        raise ConfigError(f"L = {cfg['L']}: must be positive")
    N = cfg["N"]
    if N < 256:
        raise ConfigError(f"N = {N}: need N >= 256")
    if dim == 1 and N & (N - 1):
        raise ConfigError(f"N = {N}: must be a power of two for dim=1")
    if cfg["tol"] < 1e-14:
        raise ConfigError(f"tol = {cfg['tol']:g}: below attainable round-off, use >= 1e-14")
    if not 0 < cfg["dt"] <= 0.1:
        raise ConfigError(f"dt = {cfg['dt']:g}: need 0 < dt <= 0.1")
    if not cfg["tend"] > 0:
        raise ConfigError(f"tend = {cfg['tend']:g}: must be positive")
    if cfg["stride"] < 0:
        raise ConfigError(f"stride = {cfg['stride']}: must be >= 0")
    if not 0 < cfg["eta"] <= 0.1:
        raise ConfigError(f"eta = {cfg['eta']:g}: need 0 < eta <= 0.1")
    lad = cfg["ladder"]
    if len(lad) < 4:
        raise ConfigError(f"ladder has {len(lad)} entries; need at least 4")
    if any(a <= 0 for a in lad) or any(x <= y for x, y in zip(lad, lad[1:])):
        raise ConfigError("ladder must be positive and strictly decreasing")
    if lad[0] / lad[-1] < 100:
        raise ConfigError("ladder must span at least two decades")
    if cfg["trials"] < 100:
        raise ConfigError(f"trials = {cfg['trials']}: need at least 100")
    if cfg["workers"] is not None and cfg["workers"] < 1:
        raise ConfigError(f"workers = {cfg['workers']}: must be >= 1")
    if not cfg["T_max"] > 0:
        raise ConfigError("T_max must be positive")
    return cfg
