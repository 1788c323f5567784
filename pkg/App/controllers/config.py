#DeskEBM
#Energy-based model training toolkit

#CONFIG CONTROLLERS - Reading and writing the flat key=value training configuration files.

import dataclasses

from App.errors import ConfigError
from App.models.trainConfig import TrainConfig, SgldConfig, _fieldName

#Config keys that address the nested SGLD settings.
SGLD_KEYS = {
    "sgld_steps" : "steps",
    "sgld_step_size" : "stepSize",
    "sgld_noise" : "noiseScale"
}

TRUE_WORDS = ("1", "true", "yes", "on")
FALSE_WORDS = ("0", "false", "no", "off")


def _snakeName(fieldName):
    return "".join("_" + c.lower() if c.isupper() else c for c in fieldName)


#Every key a config file may contain, mapped to the type its value is parsed as.
def configKeys():
    keys = {}
    for f in dataclasses.fields(TrainConfig):
        if f.name == "sgld":
            continue
        default = f.default if f.default is not dataclasses.MISSING else None
        keys[_snakeName(f.name)] = type(default)
    defaults = SgldConfig()
    for key, attribute in SGLD_KEYS.items():
        keys[key] = type(getattr(defaults, attribute))
    return keys


def _parseValue(key, text, kind):
    text = text.strip()
    try:
        if kind is bool:
            if text.lower() in TRUE_WORDS:
                return True
            if text.lower() in FALSE_WORDS:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError("invalid value %r for config key %s" % (text, key))


#Parses key=value lines into a dictionary of typed values. Blank lines and # comments are skipped.
def parseConfigText(text):
    keys = configKeys()
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d is not key=value: %r" % (number, line))
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in keys:
            raise ConfigError("unknown config key: %s" % key)
        values[key] = _parseValue(key, raw, keys[key])
    return values


#Builds a TrainConfig from parsed values, applying overrides (also keyed by config key) on top.
def buildTrainConfig(values=None, overrides=None):
    merged = dict(values or {})
    keys = configKeys()
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in keys:
            raise ConfigError("unknown config key: %s" % key)
        merged[key] = _parseValue(key, str(value), keys[key]) if isinstance(value, str) and keys[key] is not str else value

    sgldValues = {SGLD_KEYS[key] : merged.pop(key) for key in list(merged) if key in SGLD_KEYS}
    trainValues = {_fieldName(key) : value for key, value in merged.items()}
    return TrainConfig(sgld=SgldConfig(**sgldValues), **trainValues)


def loadTrainConfig(path, overrides=None):
    try:
        with open(path, "r") as handle:
            text = handle.read()
    except OSError as error:
        raise ConfigError("unable to read config file %s: %s" % (path, error))
    return buildTrainConfig(parseConfigText(text), overrides)


#Writes a config back out in key=value form, so runs can record exactly what they used.
def configToText(cfg):
    lines = []
    for f in dataclasses.fields(TrainConfig):
        if f.name == "sgld":
            continue
        lines.append("%s=%s" % (_snakeName(f.name), _formatValue(getattr(cfg, f.name))))
    for key, attribute in SGLD_KEYS.items():
        lines.append("%s=%s" % (key, _formatValue(getattr(cfg.sgld, attribute))))
    return "\n".join(lines) + "\n"


def _formatValue(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


#Resolves the sgld_clamp setting against the dataset it will run on.
def resolveSgldClamp(cfg, dataset):
    setting = cfg.sgldClamp.strip().lower()
    if setting == "none":
        clampRange = None
    elif setting == "auto":
        clampRange = tuple(dataset.range) if dataset.kind == "raster" else None
    else:
        try:
            lo, hi = (float(part) for part in setting.split(","))
        except ValueError:
            raise ConfigError("sgld_clamp must be auto, none or lo,hi; got %r" % cfg.sgldClamp)
        clampRange = (lo, hi)
    return dataclasses.replace(cfg.sgld, clampRange=clampRange)
