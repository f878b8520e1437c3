use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Tanh,
    /// Only valid on the final layer.
    Softmax,
    Linear,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Softmax => 3,
            Activation::Linear => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => Activation::Sigmoid,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Softmax,
            4 => Activation::Linear,
            other => return Err(Error::Format(format!("unknown activation code {other}"))),
        })
    }

    /// Applies the activation in place to a batch of pre-activations (one row per sample).
    pub(crate) fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Linear => {}
            Activation::Softmax => {
                for mut row in z.axis_iter_mut(Axis(0)) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
            }
        }
    }

    /// Multiplies `grad` (dL/da) in place by the elementwise derivative da/dz,
    /// expressed through the activation output `a`. ReLU uses a derivative of 0 at 0.
    pub(crate) fn backprop_elementwise(self, a: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Sigmoid => Zip::from(grad).and(a).for_each(|g, &a| *g *= a * (1.0 - a)),
            Activation::Relu => Zip::from(grad).and(a).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => Zip::from(grad).and(a).for_each(|g, &a| *g *= 1.0 - a * a),
            Activation::Linear => {}
            Activation::Softmax => {
                // Full Jacobian: dz_i = a_i (g_i - sum_j g_j a_j)
                for (mut g, a) in grad.axis_iter_mut(Axis(0)).zip(a.axis_iter(Axis(0))) {
                    let dot: f64 = g.iter().zip(a.iter()).map(|(g, a)| g * a).sum();
                    Zip::from(&mut g).and(&a).for_each(|g, &a| *g = a * (*g - dot));
                }
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
