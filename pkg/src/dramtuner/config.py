"""Run configuration: one YAML document describes a whole run.

Every device constant and every learner input appears in the file with its
default, so a run is fully described by one config plus one trace. Unknown
keys and out-of-range values are reported together, by field name.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import yaml

from .controller import (ControllerConfig, DEFAULT_BASELINE, METRIC_NAMES)
from .dram import (AddressMapping, DramTopology, EnergyParams, SystemParams,
                   TimingParams)
from .rl import LearnerConfig, RewardTargets, default_reward_targets


class ConfigError(ValueError):
    """Invalid run configuration; the message names every offending field."""


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams = field(default_factory=SystemParams)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    trace_split: int = 30000
    baseline: ControllerConfig = DEFAULT_BASELINE

    def __post_init__(self):
        if self.trace_split < 1:
            raise ConfigError("trace_split: must be >= 1")


def _enum_fields() -> dict:
    from . import controller as c
    return {ControllerConfig: {
        "page_policy": c.PagePolicy,
        "scheduler": c.Scheduler,
        "scheduler_buffer": c.SchedulerBuffer,
        "arbiter": c.Arbiter,
        "resp_queue": c.RespQueue,
        "refresh_policy": c.RefreshPolicy,
    }}


_ENUM_FIELDS = _enum_fields()


def _build_section(cls, data: dict, section: str, errors: list[str]):
    """Instantiate a dataclass section from a dict, collecting field errors."""
    known = {f.name for f in dc_fields(cls)}
    enums = _ENUM_FIELDS.get(cls, {})
    kwargs = {}
    bad = False
    for key, value in data.items():
        if key not in known:
            errors.append(f"{section}.{key}: unknown field")
            bad = True
            continue
        if key in enums:
            try:
                value = enums[key](value)
            except ValueError:
                choices = [e.value for e in enums[key]]
                errors.append(f"{section}.{key}: {value!r} is not one of {choices}")
                bad = True
                continue
        kwargs[key] = value
    if bad:
        return None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return None


def _clamp_refresh_windows(data: dict) -> dict:
    # Windows beyond the action domain (e.g. 8) are clamped to 7.
    out = dict(data)
    for key in ("refresh_max_postponed", "refresh_max_pulledin"):
        if isinstance(out.get(key), int) and out[key] > 7:
            out[key] = 7
    return out


def load_run_config(path: str | Path | None = None,
                    overrides: dict | None = None) -> RunConfig:
    """Load and validate a run configuration.

    `path=None` yields the built-in defaults. `overrides` maps dotted learner
    keys and `trace_split` to replacement values (used by CLI flags); they
    are applied after the file.
    """
    doc: dict = {}
    if path is not None:
        raw = Path(path).read_text(encoding="utf-8")
        loaded = yaml.safe_load(raw)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        doc = loaded

    errors: list[str] = []
    known_sections = {"topology", "timing", "energy", "mapping", "learner",
                      "trace_split", "baseline"}
    for key in doc:
        if key not in known_sections:
            errors.append(f"{key}: unknown section")

    topo = _build_section(DramTopology, doc.get("topology", {}), "topology", errors)
    timing = _build_section(TimingParams, doc.get("timing", {}), "timing", errors)
    energy = _build_section(EnergyParams, doc.get("energy", {}), "energy", errors)

    mapping = None
    if "mapping" in doc and topo is not None:
        try:
            mapping = AddressMapping.for_topology(topo, doc["mapping"])
        except (ValueError, TypeError) as exc:
            errors.append(str(exc))

    baseline = _build_section(ControllerConfig,
                              _clamp_refresh_windows(doc.get("baseline", {})),
                              "baseline", errors)

    trace_split = doc.get("trace_split", 30000)
    if not isinstance(trace_split, int) or trace_split < 1:
        errors.append(f"trace_split: must be an integer >= 1, got {trace_split!r}")
        trace_split = 30000
    if overrides and overrides.get("trace_split") is not None:
        trace_split = overrides["trace_split"]

    learner_doc = dict(doc.get("learner", {}))
    targets_doc = learner_doc.pop("targets", None)
    if overrides:
        for key in ("timesteps", "warmup", "alpha", "gamma",
                    "epsilon_old", "epsilon_new", "base_seed"):
            if overrides.get(key) is not None:
                learner_doc[key] = overrides[key]

    system = None
    if topo is not None and timing is not None and energy is not None:
        try:
            system = SystemParams(topology=topo, timing=timing, energy=energy,
                                  mapping=mapping)
        except ValueError as exc:
            errors.append(str(exc))

    targets = None
    if system is not None:
        targets = default_reward_targets(system, trace_split)
        if targets_doc is not None:
            if not isinstance(targets_doc, dict):
                errors.append("learner.targets: must be a mapping of metric to value")
            else:
                values = dict(zip(METRIC_NAMES, targets.values))
                for key, value in targets_doc.items():
                    if key not in values:
                        errors.append(f"learner.targets.{key}: unknown metric "
                                      f"(expected one of {list(METRIC_NAMES)})")
                    else:
                        values[key] = float(value)
                if not errors:
                    try:
                        targets = RewardTargets(tuple(values[m] for m in METRIC_NAMES))
                    except ValueError as exc:
                        errors.append(f"learner.targets: {exc}")

    # Validate the learner section even when the system sections failed, so
    # every bad field is reported in one pass.
    learner_doc["targets"] = targets if targets is not None \
        else default_reward_targets(SystemParams(), trace_split)
    learner = _build_section(LearnerConfig, learner_doc, "learner", errors)

    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return RunConfig(system=system, learner=learner, trace_split=trace_split,
                     baseline=baseline)


def default_config_yaml() -> str:
    """Render the built-in defaults as a commented YAML document."""
    cfg = RunConfig()
    t, e = cfg.system.timing, cfg.system.energy
    topo = cfg.system.topology
    b = cfg.baseline
    lr = cfg.learner
    targets = "\n".join(f"    {name}: {value}"
                        for name, value in zip(METRIC_NAMES, lr.targets.values))
    return f"""\
# dramtuner run configuration (defaults)
topology:
  bank_groups: {topo.bank_groups}
  banks_per_group: {topo.banks_per_group}
  rows: {topo.rows}
  columns: {topo.columns}
  column_width_bytes: {topo.column_width_bytes}
  burst_length: {topo.burst_length}
timing:
  tRCD: {t.tRCD}
  tRP: {t.tRP}
  tCL: {t.tCL}
  tRAS: {t.tRAS}
  tWR: {t.tWR}
  tRTP: {t.tRTP}
  tCCD_S: {t.tCCD_S}
  tCCD_L: {t.tCCD_L}
  tRRD_S: {t.tRRD_S}
  tRRD_L: {t.tRRD_L}
  tREFI: {t.tREFI}
  tRFC: {t.tRFC}
  tBURST: {t.tBURST}
energy:
  e_act: {e.e_act}
  e_pre: {e.e_pre}
  e_rd: {e.e_rd}
  e_wr: {e.e_wr}
  e_ref_per_bank: {e.e_ref_per_bank}
  p_background_mw: {e.p_background_mw}
  clock_period_ps: {e.clock_period_ps}
# mapping:            # optional LSB overrides; widths come from the topology
#   bank_group: 6
#   bank: 8
#   column: 10
#   row: 17
trace_split: {cfg.trace_split}
learner:
  timesteps: {lr.timesteps}
  warmup: {lr.warmup}
  alpha: {lr.alpha}
  gamma: {lr.gamma}
  epsilon_old: {lr.epsilon_old}
  epsilon_new: {lr.epsilon_new}
  base_seed: {lr.base_seed}
  targets:
{targets}
baseline:
  page_policy: {b.page_policy.value}
  scheduler: {b.scheduler.value}
  scheduler_buffer: {b.scheduler_buffer.value}
  arbiter: {b.arbiter.value}
  resp_queue: {b.resp_queue.value}
  refresh_policy: {b.refresh_policy.value}
  refresh_max_postponed: {b.refresh_max_postponed}
  refresh_max_pulledin: {b.refresh_max_pulledin}
  request_buffer_size: {b.request_buffer_size}
  max_active_transactions: {b.max_active_transactions}
"""
