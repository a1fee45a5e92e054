"""Line-oriented scenario files.

Grammar (one record per line; blank lines and '#' comments ignored):

    schema 1
    resource <id> [capacity=<float>]
    slice <id> share=<float>
    class <id> slice=<id> demand=<res>:<float>[,<res>:<float>...]
          [arrival_rate=<float>] [mean_workload=<float>] [workload=exp|det]
    run engines=<engine>[,<engine>...] horizon=<float> [warmup=<float>]
        [seeds=<a>..<b>|<list>] [max_departures=<int>]
    sweep key=share:<slice_id>|arrival_rate:*|arrival_rate:<class_id>
          values=<float>[,<float>...]

Engines are written as 'maxmin-scs', 'dps', 'drf', 'drf_unconstrained',
'scs(<alpha>)' or 'static-partition(<alpha>)'.  Exactly one run record is
required; the sweep record is optional.  Unknown record types and unknown
keys are rejected with their line number.
"""

from dataclasses import dataclass, replace

from importlib import resources

from .model import (Instance, Resource, SliceSpec, UserClass, ValidationError,
                    validate_instance, EXPONENTIAL, DETERMINISTIC)
from .sim import EngineSpec, Scenario


class ScenarioParseError(ValidationError):
    pass


@dataclass(frozen=True)
class RunBlock:
    engines: tuple[EngineSpec, ...]
    horizon: float
    warmup: float = 0.1
    seeds: tuple[int, ...] = (0,)
    max_departures: int | None = None


@dataclass(frozen=True)
class SweepSpec:
    kind: str          # "share" or "arrival_rate"
    target: str        # slice id, class id, or "*"
    values: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioFile:
    label: str
    instance: Instance
    run: RunBlock
    sweep: SweepSpec | None = None

    def scenario(self, engine, seed, sweep_value=None) -> Scenario:
        inst = self.instance if sweep_value is None else apply_sweep(self, sweep_value)
        return Scenario(inst, engine, self.run.horizon, self.run.warmup,
                        seed, self.run.max_departures, self.label)


def _fail(lineno, msg):
    raise ScenarioParseError(f"line {lineno}: {msg}")


def _fields(lineno, rest, allowed, required):
    out = {}
    for tok in rest:
        if "=" not in tok:
            _fail(lineno, f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k not in allowed:
            _fail(lineno, f"unknown key {k!r}")
        if k in out:
            _fail(lineno, f"duplicate key {k!r}")
        out[k] = v
    for k in required:
        if k not in out:
            _fail(lineno, f"missing key {k!r}")
    return out


def _float(lineno, key, v):
    try:
        return float(v)
    except ValueError:
        _fail(lineno, f"bad number for {key}: {v!r}")


def _parse_seeds(lineno, v):
    if ".." in v:
        a, _, b = v.partition("..")
        try:
            lo, hi = int(a), int(b)
        except ValueError:
            _fail(lineno, f"bad seed range {v!r}")
        if hi < lo:
            _fail(lineno, f"empty seed range {v!r}")
        return tuple(range(lo, hi + 1))
    try:
        return tuple(int(x) for x in v.split(","))
    except ValueError:
        _fail(lineno, f"bad seed list {v!r}")


def parse_scenario_text(text, label="") -> ScenarioFile:
    resources_ = []
    slices = []
    classes = []
    run = None
    sweep = None
    schema_seen = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        record, rest = tok[0], tok[1:]

        if not schema_seen:
            if record != "schema" or rest != ["1"]:
                _fail(lineno, "first record must be 'schema 1'")
            schema_seen = True
            continue

        if record == "resource":
            if not rest or "=" in rest[0]:
                _fail(lineno, "resource needs an id")
            kv = _fields(lineno, rest[1:], {"capacity"}, ())
            cap = _float(lineno, "capacity", kv["capacity"]) if "capacity" in kv else 1.0
            resources_.append(Resource(rest[0], cap))
        elif record == "slice":
            if not rest or "=" in rest[0]:
                _fail(lineno, "slice needs an id")
            kv = _fields(lineno, rest[1:], {"share"}, ("share",))
            slices.append(SliceSpec(rest[0], _float(lineno, "share", kv["share"])))
        elif record == "class":
            if not rest or "=" in rest[0]:
                _fail(lineno, "class needs an id")
            kv = _fields(lineno, rest[1:],
                         {"slice", "demand", "arrival_rate", "mean_workload",
                          "workload"},
                         ("slice", "demand"))
            demand = {}
            for part in kv["demand"].split(","):
                rid, colon, val = part.partition(":")
                if not colon:
                    _fail(lineno, f"demand entries are <resource>:<value>, got {part!r}")
                if rid in demand:
                    _fail(lineno, f"duplicate demand resource {rid!r}")
                demand[rid] = _float(lineno, "demand", val)
            wl = kv.get("workload", "exp")
            if wl not in ("exp", "det"):
                _fail(lineno, f"workload must be exp or det, got {wl!r}")
            classes.append(UserClass(
                rest[0], kv["slice"], demand,
                arrival_rate=_float(lineno, "arrival_rate", kv["arrival_rate"])
                if "arrival_rate" in kv else 0.0,
                mean_workload=_float(lineno, "mean_workload", kv["mean_workload"])
                if "mean_workload" in kv else 1.0,
                workload=EXPONENTIAL if wl == "exp" else DETERMINISTIC))
        elif record == "run":
            if run is not None:
                _fail(lineno, "duplicate run record")
            kv = _fields(lineno, rest,
                         {"engines", "horizon", "warmup", "seeds",
                          "max_departures"},
                         ("engines", "horizon"))
            engines = []
            for e in kv["engines"].split(","):
                try:
                    engines.append(EngineSpec.from_string(e))
                except ValidationError as exc:
                    _fail(lineno, f"{exc} at run.engine")
            run = RunBlock(
                tuple(engines),
                _float(lineno, "horizon", kv["horizon"]),
                _float(lineno, "warmup", kv["warmup"]) if "warmup" in kv else 0.1,
                _parse_seeds(lineno, kv["seeds"]) if "seeds" in kv else (0,),
                int(kv["max_departures"]) if "max_departures" in kv else None)
        elif record == "sweep":
            if sweep is not None:
                _fail(lineno, "duplicate sweep record")
            kv = _fields(lineno, rest, {"key", "values"}, ("key", "values"))
            kind, colon, target = kv["key"].partition(":")
            if not colon or kind not in ("share", "arrival_rate"):
                _fail(lineno, f"sweep key must be share:<slice> or "
                              f"arrival_rate:<class|*>, got {kv['key']!r}")
            values = tuple(_float(lineno, "values", x)
                           for x in kv["values"].split(","))
            if not values:
                _fail(lineno, "sweep needs at least one value")
            sweep = SweepSpec(kind, target, values)
        else:
            _fail(lineno, f"unknown record type {record!r}")

    if not schema_seen:
        raise ScenarioParseError("empty scenario file")
    if run is None:
        raise ScenarioParseError("missing run record")
    inst = validate_instance(Instance(tuple(resources_), tuple(slices),
                                      tuple(classes)))
    sf = ScenarioFile(label, inst, run, sweep)
    if sweep is not None:
        _check_sweep(sf)
    return sf


def _check_sweep(sf):
    sw = sf.sweep
    if sw.kind == "share":
        if sf.instance.n_slices != 2:
            raise ScenarioParseError(
                "share sweeps need exactly two slices (sweep.key)")
        if sw.target not in sf.instance.slice_index:
            raise ScenarioParseError(f"unknown slice {sw.target!r} (sweep.key)")
        for v in sw.values:
            if not (0.0 < v < 1.0):
                raise ScenarioParseError(
                    f"swept share {v:g} outside (0, 1) (sweep.values)")
    else:
        if sw.target != "*" and sw.target not in sf.instance.class_index:
            raise ScenarioParseError(f"unknown class {sw.target!r} (sweep.key)")
        for v in sw.values:
            if v < 0:
                raise ScenarioParseError(
                    f"negative arrival rate {v:g} (sweep.values)")


def apply_sweep(sf, value) -> Instance:
    """Instance with the swept parameter set to value."""
    sw = sf.sweep
    inst = sf.instance
    if sw is None:
        raise ValidationError("scenario has no sweep")
    if sw.kind == "share":
        tgt = sf.instance.slice_index[sw.target]
        new_slices = tuple(
            replace(s, share=value if v == tgt else 1.0 - value)
            for v, s in enumerate(inst.slices))
        return validate_instance(replace(inst, slices=new_slices))
    new_classes = tuple(
        replace(c, arrival_rate=value)
        if sw.target in ("*", c.id) else c
        for c in inst.classes)
    return validate_instance(replace(inst, classes=new_classes))


def builtin_names() -> tuple[str, ...]:
    root = resources.files("sliceshare") / "scenarios"
    return tuple(sorted(p.name[:-4] for p in root.iterdir()
                        if p.name.endswith(".txt")))


def load_builtin(name) -> ScenarioFile:
    path = resources.files("sliceshare") / "scenarios" / f"{name}.txt"
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ValidationError(
            f"unknown scenario {name!r}; built-ins: {', '.join(builtin_names())}")
    return parse_scenario_text(text, label=name)
