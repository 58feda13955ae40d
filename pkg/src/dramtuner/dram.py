"""Single-channel, single-rank DDR4-like device model.

Bank state machines, command timing legality and per-command energy
accounting. The constraint set is deliberately small (no tFAW, no
write-to-read bus turnaround, no rank-to-rank switching penalties): just
enough fidelity to make controller policy choices consequential while
staying deterministic and fast at desk scale.

Units: cycles for time, picojoules for energy, picoseconds for the clock
period, milliwatts for background power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Command kinds.
ACT = "ACT"
PRE = "PRE"
RD = "RD"
WR = "WR"
REF = "REF"

COMMANDS = (ACT, PRE, RD, WR, REF)

# Sentinel for "no such command has ever been issued": far enough in the
# past that every relative constraint is already satisfied at cycle 0.
NEVER = -(1 << 40)


class SequencingError(RuntimeError):
    """A command was requested in a bank state that cannot accept it."""


class TimingViolation(RuntimeError):
    """A command was issued before its earliest legal cycle (controller bug)."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class DramTopology:
    """Geometry of the modeled device. Single channel, single rank."""

    channels: int = 1
    ranks: int = 1
    bank_groups: int = 4
    banks_per_group: int = 4
    rows: int = 32768
    columns: int = 1024
    column_width_bytes: int = 8
    burst_length: int = 8

    def __post_init__(self):
        if self.channels != 1 or self.ranks != 1:
            raise ValueError("topology: only single-channel, single-rank is modeled")
        for name in ("bank_groups", "banks_per_group", "rows", "columns",
                     "column_width_bytes", "burst_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"topology.{name}: must be >= 1")
        if self.bank_groups * self.banks_per_group > 64:
            raise ValueError("topology: bank_groups * banks_per_group must be <= 64")
        if not _is_pow2(self.rows) or not _is_pow2(self.columns):
            raise ValueError("topology: rows and columns must be powers of two")
        if not _is_pow2(self.column_width_bytes) or not _is_pow2(self.burst_length):
            raise ValueError("topology: column width and burst length must be powers of two")
        if self.columns % self.burst_length:
            raise ValueError("topology: burst_length must divide columns")

    @property
    def total_banks(self) -> int:
        return self.bank_groups * self.banks_per_group

    @property
    def line_bytes(self) -> int:
        """Bytes moved by one burst: one request is one such access."""
        return self.column_width_bytes * self.burst_length


@dataclass(frozen=True)
class TimingParams:
    """Timing constraints in controller clock cycles.

    Defaults are representative of a 1600 MT/s-class part and are not
    normative; everything is configurable.
    """

    tRCD: int = 16
    tRP: int = 16
    tCL: int = 16
    tRAS: int = 39
    tWR: int = 18
    tRTP: int = 9
    tCCD_S: int = 4
    tCCD_L: int = 6
    tRRD_S: int = 4
    tRRD_L: int = 6
    tREFI: int = 9360
    tRFC: int = 420
    tBURST: int = 4

    def __post_init__(self):
        for name in ("tRCD", "tRP", "tCL", "tRAS", "tWR", "tRTP", "tCCD_S",
                     "tCCD_L", "tRRD_S", "tRRD_L", "tREFI", "tRFC", "tBURST"):
            if getattr(self, name) <= 0:
                raise ValueError(f"timing.{name}: must be > 0")
        if self.tRAS < self.tRCD:
            raise ValueError("timing: tRAS must be >= tRCD")
        if self.tCCD_L < self.tCCD_S:
            raise ValueError("timing: tCCD_L must be >= tCCD_S")
        if self.tRRD_L < self.tRRD_S:
            raise ValueError("timing: tRRD_L must be >= tRRD_S")
        # Keeps consecutive bursts from overlapping on the data bus, so the
        # bandwidth model never exceeds the theoretical peak.
        if self.tCCD_S < self.tBURST:
            raise ValueError("timing: tCCD_S must be >= tBURST")


@dataclass(frozen=True)
class EnergyParams:
    """Per-command energies (pJ), background power (mW) and clock period (ps).

    Only the relative ordering of these constants matters for learning
    dynamics; defaults are representative, not normative.
    """

    e_act: float = 909.0
    e_pre: float = 909.0
    e_rd: float = 940.0
    e_wr: float = 1020.0
    e_ref_per_bank: float = 2300.0
    p_background_mw: float = 120.0
    clock_period_ps: float = 1250.0

    def __post_init__(self):
        for name in ("e_act", "e_pre", "e_rd", "e_wr", "e_ref_per_bank",
                     "p_background_mw"):
            if getattr(self, name) < 0:
                raise ValueError(f"energy.{name}: must be >= 0")
        if self.clock_period_ps <= 0:
            raise ValueError("energy.clock_period_ps: must be > 0")


@dataclass(frozen=True)
class DecodedAddress:
    """Bank group, bank, row and starting column of one line access."""

    bank_group: int
    bank: int
    row: int
    column: int

    @property
    def bg(self) -> int:
        return self.bank_group


@dataclass(frozen=True)
class AddressMapping:
    """Bit-slice mapping from a byte address to (bank group, bank, row, column).

    The low `offset_bits` address the bytes inside one burst-sized line and
    are masked off. Field widths are fixed by the topology; only the LSB
    positions are configurable. The column field counts lines within a row;
    decoded columns are scaled back to device columns (multiples of the
    burst length).
    """

    offset_bits: int
    bg_lsb: int
    bg_width: int
    bank_lsb: int
    bank_width: int
    col_lsb: int
    col_width: int
    row_lsb: int
    row_width: int
    burst_length: int

    @classmethod
    def for_topology(cls, topo: DramTopology,
                     lsbs: dict[str, int] | None = None) -> "AddressMapping":
        offset = (topo.line_bytes).bit_length() - 1
        bg_w = (topo.bank_groups - 1).bit_length() if topo.bank_groups > 1 else 0
        bank_w = (topo.banks_per_group - 1).bit_length() if topo.banks_per_group > 1 else 0
        col_w = (topo.columns // topo.burst_length - 1).bit_length()
        row_w = (topo.rows - 1).bit_length()
        if lsbs is None:
            bg_l = offset
            bank_l = bg_l + bg_w
            col_l = bank_l + bank_w
            row_l = col_l + col_w
        else:
            try:
                bg_l = int(lsbs["bank_group"])
                bank_l = int(lsbs["bank"])
                col_l = int(lsbs["column"])
                row_l = int(lsbs["row"])
            except KeyError as exc:
                raise ValueError(f"mapping: missing field {exc}") from None
        m = cls(offset, bg_l, bg_w, bank_l, bank_w, col_l, col_w, row_l, row_w,
                topo.burst_length)
        m._validate()
        return m

    def _validate(self):
        spans = [("bank_group", self.bg_lsb, self.bg_width),
                 ("bank", self.bank_lsb, self.bank_width),
                 ("column", self.col_lsb, self.col_width),
                 ("row", self.row_lsb, self.row_width)]
        used: set[int] = set(range(self.offset_bits))
        for name, lsb, width in spans:
            if lsb < self.offset_bits:
                raise ValueError(f"mapping.{name}: overlaps the line offset bits")
            if lsb + width > 64:
                raise ValueError(f"mapping.{name}: exceeds 64 address bits")
            bits = set(range(lsb, lsb + width))
            if bits & used:
                raise ValueError(f"mapping.{name}: overlaps another field")
            used |= bits

    def decode(self, addr: int) -> DecodedAddress:
        addr &= (1 << 64) - 1
        bg = (addr >> self.bg_lsb) & ((1 << self.bg_width) - 1)
        bank = (addr >> self.bank_lsb) & ((1 << self.bank_width) - 1)
        line = (addr >> self.col_lsb) & ((1 << self.col_width) - 1)
        row = (addr >> self.row_lsb) & ((1 << self.row_width) - 1)
        return DecodedAddress(bg, bank, row, line * self.burst_length)

    def encode(self, decoded: DecodedAddress) -> int:
        """Lowest byte address that decodes back to `decoded`."""
        if decoded.column % self.burst_length:
            raise ValueError("encode: column must be a multiple of the burst length")
        line = decoded.column // self.burst_length
        return ((decoded.bank_group << self.bg_lsb)
                | (decoded.bank << self.bank_lsb)
                | (line << self.col_lsb)
                | (decoded.row << self.row_lsb))


@dataclass(frozen=True)
class SystemParams:
    """Bundle of everything the device side of a simulation needs."""

    topology: DramTopology = field(default_factory=DramTopology)
    timing: TimingParams = field(default_factory=TimingParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    mapping: AddressMapping | None = None

    def __post_init__(self):
        if self.mapping is None:
            object.__setattr__(self, "mapping",
                               AddressMapping.for_topology(self.topology))


def peak_bandwidth_bps(system: SystemParams) -> float:
    """Theoretical peak of the data bus in bits per second."""
    t = system.topology
    bits_per_burst = t.line_bytes * 8
    burst_seconds = system.timing.tBURST * system.energy.clock_period_ps * 1e-12
    return bits_per_burst / burst_seconds


def background_energy(elapsed_cycles: int, energy: EnergyParams) -> float:
    """Standby energy in pJ over `elapsed_cycles`.

    1 mW * 1 ps = 1e-3 W * 1e-12 s = 1e-15 J = 1e-3 pJ, hence the 1e-3
    conversion factor from mW*ps to pJ.
    """
    if elapsed_cycles < 0:
        raise ValueError("background_energy: elapsed_cycles must be >= 0")
    return energy.p_background_mw * energy.clock_period_ps * elapsed_cycles * 1e-3


@dataclass
class BankState:
    """One bank's row buffer status and last-command timestamps.

    `open_row is None` means idle; `refresh_until` is the cycle at which the
    most recent refresh finishes (0 if never refreshed). Timestamps are
    per-command-category and only ever move forward.
    """

    open_row: int | None = None
    refresh_until: int = 0
    last_activate: int = NEVER
    last_precharge: int = NEVER
    last_read: int = NEVER
    last_write: int = NEVER


def earliest_issue_cycle(cmd: str, target, state: BankState,
                         timing: TimingParams) -> int:
    """Earliest cycle at which `cmd` satisfies all per-bank constraints.

    `target` only needs a `.row` attribute and is ignored for PRE/REF.
    Raises SequencingError when the bank state cannot accept the command at
    all (e.g. RD on an idle bank).
    """
    if cmd == ACT:
        if state.open_row is not None:
            raise SequencingError("ACT on a bank with an open row")
        return max(state.last_precharge + timing.tRP, state.refresh_until)
    if cmd == PRE:
        if state.open_row is None:
            raise SequencingError("PRE on an idle bank")
        return max(state.last_activate + timing.tRAS,
                   state.last_read + timing.tRTP,
                   state.last_write + timing.tWR)
    if cmd in (RD, WR):
        if state.open_row is None:
            raise SequencingError(f"{cmd} on an idle bank")
        if target.row != state.open_row:
            raise SequencingError(f"{cmd} to row {target.row} while row "
                                  f"{state.open_row} is open")
        return max(state.last_activate + timing.tRCD,
                   state.last_read + timing.tCCD_L,
                   state.last_write + timing.tCCD_L,
                   state.refresh_until)
    if cmd == REF:
        if state.open_row is not None:
            raise SequencingError("REF requires the bank to be precharged")
        return max(state.last_precharge + timing.tRP, state.refresh_until)
    raise ValueError(f"unknown command {cmd!r}")


def issue_command(cmd: str, target, cycle: int, state: BankState,
                  timing: TimingParams, energy: EnergyParams) -> float:
    """Apply `cmd` to the bank at `cycle` and return its energy in pJ.

    Raises TimingViolation when `cycle` is earlier than the command's
    earliest legal cycle; that always indicates a controller bug and must
    abort the run.
    """
    earliest = earliest_issue_cycle(cmd, target, state, timing)
    if cycle < earliest:
        raise TimingViolation(f"{cmd} at cycle {cycle}, earliest legal is {earliest}")
    if cmd == ACT:
        state.open_row = target.row
        state.last_activate = cycle
        return energy.e_act
    if cmd == PRE:
        state.open_row = None
        state.last_precharge = cycle
        return energy.e_pre
    if cmd == RD:
        state.last_read = cycle
        return energy.e_rd
    if cmd == WR:
        state.last_write = cycle
        return energy.e_wr
    # REF
    state.refresh_until = cycle + timing.tRFC
    return energy.e_ref_per_bank


class DramDevice:
    """All banks of the rank plus channel-level command tracking.

    The channel tracks the last activate and the last column access to apply
    the bank-group-sensitive tRRD/tCCD spacings, and serializes the command
    bus at one command per cycle. Per-partition accounting (energy, command
    log) is reset by `begin_partition`; bank and channel state persist so a
    trace's partitions can carry over.
    """

    def __init__(self, system: SystemParams):
        self.system = system
        self.topology = system.topology
        self.timing = system.timing
        self.energy = system.energy
        self.banks = [BankState() for _ in range(system.topology.total_banks)]
        self.chan_last_act = NEVER
        self.chan_last_act_bg = -1
        self.chan_last_cas = NEVER
        self.chan_last_cas_bg = -1
        self.cmd_bus_next = 0
        self.energy_pj = 0.0
        self.commands: list[tuple[int, str, int, int]] = []

    def begin_partition(self) -> None:
        self.energy_pj = 0.0
        self.commands = []

    def flat(self, bank_group: int, bank: int) -> int:
        return bank_group * self.topology.banks_per_group + bank

    def next_command_kind(self, entry) -> str:
        """What the bank needs next to serve `entry` (.flat/.row/.is_write)."""
        open_row = self.banks[entry.flat].open_row
        if open_row == entry.row:
            return WR if entry.is_write else RD
        if open_row is None:
            return ACT
        return PRE

    def command_earliest(self, cmd: str, entry) -> int:
        """Per-bank constraints plus channel spacing plus command bus."""
        t = self.timing
        earliest = earliest_issue_cycle(cmd, entry, self.banks[entry.flat], t)
        if cmd == ACT:
            spacing = t.tRRD_L if entry.bg == self.chan_last_act_bg else t.tRRD_S
            earliest = max(earliest, self.chan_last_act + spacing)
        elif cmd in (RD, WR):
            spacing = t.tCCD_L if entry.bg == self.chan_last_cas_bg else t.tCCD_S
            earliest = max(earliest, self.chan_last_cas + spacing)
        return max(earliest, self.cmd_bus_next)

    def _log(self, cycle: int, cmd: str, bg: int, bank: int) -> None:
        self.commands.append((cycle, cmd, bg, bank))

    def issue_act(self, entry, cycle: int) -> None:
        if cycle < self.command_earliest(ACT, entry):
            raise TimingViolation(f"ACT at {cycle} violates channel constraints")
        self.energy_pj += issue_command(ACT, entry, cycle,
                                        self.banks[entry.flat],
                                        self.timing, self.energy)
        self.chan_last_act = cycle
        self.chan_last_act_bg = entry.bg
        self.cmd_bus_next = cycle + 1
        self._log(cycle, ACT, entry.bg, entry.bank)

    def issue_pre(self, flat: int, cycle: int) -> None:
        state = self.banks[flat]
        earliest = max(earliest_issue_cycle(PRE, None, state, self.timing),
                       self.cmd_bus_next)
        if cycle < earliest:
            raise TimingViolation(f"PRE at {cycle}, earliest legal is {earliest}")
        self.energy_pj += issue_command(PRE, None, cycle, state,
                                        self.timing, self.energy)
        self.cmd_bus_next = cycle + 1
        bg, bank = divmod(flat, self.topology.banks_per_group)
        self._log(cycle, PRE, bg, bank)

    def pre_earliest(self, flat: int) -> int:
        return max(earliest_issue_cycle(PRE, None, self.banks[flat], self.timing),
                   self.cmd_bus_next)

    def issue_cas(self, entry, cycle: int, autoprecharge: bool) -> int:
        """Issue the column access; returns the cycle its data burst ends.

        With `autoprecharge` the bank closes itself once tRAS and the
        read-to-precharge (or write recovery) delay are met; the implicit PRE
        takes no command-bus slot, mirroring RDA/WRA.
        """
        cmd = WR if entry.is_write else RD
        if cycle < self.command_earliest(cmd, entry):
            raise TimingViolation(f"{cmd} at {cycle} violates channel constraints")
        t = self.timing
        state = self.banks[entry.flat]
        self.energy_pj += issue_command(cmd, entry, cycle, state, t, self.energy)
        self.chan_last_cas = cycle
        self.chan_last_cas_bg = entry.bg
        self.cmd_bus_next = cycle + 1
        self._log(cycle, cmd, entry.bg, entry.bank)
        if autoprecharge:
            recovery = t.tWR if entry.is_write else t.tRTP
            pre_cycle = max(state.last_activate + t.tRAS, cycle + recovery)
            state.open_row = None
            state.last_precharge = pre_cycle
            self.energy_pj += self.energy.e_pre
            self._log(pre_cycle, PRE, entry.bg, entry.bank)
        return cycle + t.tCL + t.tBURST

    def first_open_bank(self) -> int | None:
        for flat, bank in enumerate(self.banks):
            if bank.open_row is not None:
                return flat
        return None

    def refresh_earliest(self) -> int:
        earliest = self.cmd_bus_next
        for bank in self.banks:
            earliest = max(earliest,
                           earliest_issue_cycle(REF, None, bank, self.timing))
        return earliest

    def issue_refresh(self, cycle: int) -> None:
        """All-bank refresh: every bank must already be precharged."""
        if cycle < self.refresh_earliest():
            raise TimingViolation(f"REF at {cycle} before all banks are ready")
        for bank in self.banks:
            self.energy_pj += issue_command(REF, None, cycle, bank,
                                            self.timing, self.energy)
        self.cmd_bus_next = cycle + 1
        self._log(cycle, REF, -1, -1)
