//! Finite-difference verification of the analytic loss gradient.

use super::network::{cross_entropy, Model, Trace};
use crate::error::Result;
use crate::repr::Tensor3;
use crate::signal::GestureClass;

pub const GRAD_CHECK_EPS: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely rather than relatively;
/// central differences cannot resolve them below roughly `1e-11`.
pub const RELATIVE_FLOOR: f64 = 1e-6;
/// Step reductions tried when a perturbation crosses a ReLU/pooling kink.
const STEP_SHRINK: [f64; 3] = [1.0, 0.1, 0.01];

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub layer: usize,
    pub name: &'static str,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub groups: Vec<GroupError>,
    pub checked: usize,
    /// Parameters near a ReLU/pooling kink compared with the second-order
    /// one-sided difference from the smooth side.
    pub one_sided: usize,
    /// Parameters with a kink on both sides at every step size; skipped.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares the backpropagated gradient of the cross-entropy loss with
/// central differences (step [`GRAD_CHECK_EPS`]) for every parameter. The
/// input must already be normalized.
pub fn grad_check(model: &Model, input: &Tensor3, label: GestureClass) -> Result<GradCheckReport> {
    let net = model.network();
    let mut trace = Trace::default();
    let x = input.data();
    model.check_input(input)?;
    let base_loss = cross_entropy(net.forward(&model.params, x, &mut trace)?, label.index()).0;
    let (_, g) = cross_entropy(trace.logits(), label.index());
    let base_pattern = net.activation_pattern(&trace);
    let mut analytic = vec![0.0; net.param_count()];
    net.backward(&model.params, &mut trace, &g, &mut analytic)?;

    let mut params = model.params.clone();
    // layers below the perturbed one keep their activations
    let probe = |params: &mut [f64], i: usize, value: f64, layer: usize, trace: &mut Trace| -> Result<(f64, bool)> {
        let orig = params[i];
        params[i] = value;
        let logits = net.forward_from(params, layer, trace)?;
        let loss = cross_entropy(logits, label.index()).0;
        params[i] = orig;
        Ok((loss, net.activation_pattern(trace) == base_pattern))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        groups: Vec::new(),
        checked: 0,
        one_sided: 0,
        skipped: 0,
    };
    for group in net.param_groups() {
        let mut worst: f64 = 0.0;
        for i in group.offset..group.offset + group.len {
            let orig = params[i];
            let mut numeric = None;
            for shrink in STEP_SHRINK {
                let h = GRAD_CHECK_EPS * shrink;
                let mut at = |k: f64| probe(&mut params, i, orig + k * h, group.layer, &mut trace);
                let (plus, plus_smooth) = at(1.0)?;
                let (minus, minus_smooth) = at(-1.0)?;
                if plus_smooth && minus_smooth {
                    numeric = Some((plus - minus) / (2.0 * h));
                    break;
                }
                let (side, f1) = if plus_smooth { (1.0, plus) } else { (-1.0, minus) };
                if plus_smooth || minus_smooth {
                    let (f2, smooth) = at(2.0 * side)?;
                    if smooth {
                        report.one_sided += 1;
                        numeric = Some(side * (4.0 * f1 - 3.0 * base_loss - f2) / (2.0 * h));
                        break;
                    }
                }
            }
            let Some(numeric) = numeric else {
                report.skipped += 1;
                continue;
            };
            worst = worst.max(relative_error(analytic[i], numeric));
            report.checked += 1;
        }
        net.forward_from(&params, group.layer, &mut trace)?;
        report.max_rel_error = report.max_rel_error.max(worst);
        report.groups.push(GroupError {
            layer: group.layer,
            name: group.name,
            max_rel_error: worst,
        });
    }
    Ok(report)
}
