//! Gauge-covariant lattice Schrödinger solver: Peierls links, Dirichlet
//! masks, Crank-Nicolson stepping, two-beam interference experiments and
//! field dumps.

pub mod experiment;
pub mod field;
pub mod io;
pub mod lattice;
pub mod solver;

pub use experiment::{meeting_steps, two_beam_experiment, two_beam_experiment_with, FringeRecord, TwoBeamOptions};
pub use io::{read_complex, read_dump, read_probe_csv, write_complex, write_density, write_density_values, write_probe_csv, DumpHeader, DumpKind};
pub use field::{init_packet, Field, PacketInit};
pub use lattice::{build_lattice, lattice_gauge_transform, Lattice, LatticeSpec, Stencil};
pub use solver::{evolve, step, Probe, ProbeRecord, Propagator};
