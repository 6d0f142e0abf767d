//! Boundary areas and entanglement entropies of random graph states.
//!
//! A graph state is built from one maximally entangled pair per edge with an
//! independent Haar unitary at every vertex. Tracing out a subset of the edge
//! endpoints ("legs") gives a random mixed state whose average entropy follows
//! an area law: `E H = |∂S| ln N - h + o(1)`, where the area `|∂S|` is the
//! maximal flow of an auxiliary network, or equivalently the maximal number of
//! crossings over compatible markings of the fattened graph.
//!
//! Modules:
//! - [`graph`]: graphs, legs, trace specifications, marginals.
//! - [`flow`]: the source/sink network, exact max-flow, min cuts.
//! - [`marking`]: fattened graphs, crossings, brute-force area, flow to marking.
//! - [`nc`]: permutations, non-crossing partitions, multichains, moment sums.
//! - [`spectral`]: Marchenko–Pastur quantities and entropy predictions.
//! - [`sim`]: Monte Carlo sampling of the random state ensemble.
//! - [`transport`]: the entanglement transport problem and its certificate.
//! - [`cli`]: the command-line surface and report documents.

pub mod cli;
pub mod error;
pub mod flow;
pub mod graph;
pub mod marking;
pub mod nc;
pub mod sim;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
