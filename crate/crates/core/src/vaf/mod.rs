//! Value approximation network: architecture, weight file format, CPU
//! forward pass and the state encoder that feeds it.

pub mod arch;
pub mod encode;
pub mod forward;
pub mod parity;
pub mod synth;
pub mod weights;

use std::path::Path;

pub use arch::{InputShape, LayerKind, LayerSpec, ShapeChain};
pub use encode::{encode, EncodedState, Focus};
pub use weights::{LayerParams, Network};

use crate::error::{Error, Result};
use crate::planner::StateEvaluator;
use crate::sim::{SimState, Simulator};

/// A loaded network bound to an encoder shape, usable as the planner's
/// warm-up evaluator.
#[derive(Clone, Debug)]
pub struct ValueNetwork {
    net: Network,
}

impl ValueNetwork {
    /// Fails with a shape error when the network's input rows differ from the
    /// simulator's matrix rows.
    pub fn new(net: Network, sim: &Simulator) -> Result<Self> {
        let rows = sim.layout().row_count();
        if net.input().rows != rows {
            return Err(Error::Shape {
                layer: "full_conv1".into(),
                expected: format!("{rows} input rows for this line"),
                actual: format!("{} rows", net.input().rows),
            });
        }
        Ok(ValueNetwork { net })
    }

    pub fn load(path: &Path, sim: &Simulator) -> Result<Self> {
        Self::new(Network::load(path)?, sim)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn predict(
        &self,
        sim: &Simulator,
        state: &SimState,
        parent: Option<&SimState>,
        grandparent: Option<&SimState>,
    ) -> Result<f32> {
        let e = encode(sim, self.net.input(), state, parent, grandparent)?;
        self.net.forward(&e.full, &e.local)
    }
}

impl StateEvaluator for ValueNetwork {
    fn evaluate(
        &self,
        sim: &Simulator,
        state: &SimState,
        parent: &SimState,
        grandparent: Option<&SimState>,
    ) -> f64 {
        let v = self
            .predict(sim, state, Some(parent), grandparent)
            .expect("row count checked at construction");
        f64::from(v)
    }
}
