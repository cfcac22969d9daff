use alloc::string::String;
use alloc::vec::Vec;

use super::{Graph, NodeId, Tensor, TensorError};

/// Lower bound on the denominator of the relative error, so that entries with
/// vanishing true gradient are judged by absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// `|analytic - numeric| / max(|analytic|, |numeric|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = libm::fabs(analytic)
        .max(libm::fabs(numeric))
        .max(REL_ERROR_FLOOR);
    libm::fabs(analytic - numeric) / denom
}

/// Something whose scalar loss can be differentiated against a list of
/// parameter tensors and re-evaluated after in-place perturbation.
pub trait Differentiable {
    type Error: From<TensorError>;

    fn param_count(&self) -> usize;
    fn param_name(&self, index: usize) -> String;
    fn param_mut(&mut self, index: usize) -> &mut Tensor;
    fn loss(&self) -> Result<f64, Self::Error>;
    /// Loss plus one gradient tensor per parameter, in parameter order.
    fn loss_and_grads(&self) -> Result<(f64, Vec<Tensor>), Self::Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub elements: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error < self.tolerance)
    }
}

/// Compares analytic gradients with central differences
/// `(f(p + step e_i) - f(p - step e_i)) / (2 step)` for every element of
/// every parameter. Parameters are restored bit-exactly afterwards.
pub fn check_problem<P: Differentiable>(
    problem: &mut P,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport, P::Error> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let (_, analytic) = problem.loss_and_grads()?;
    let mut params = Vec::with_capacity(problem.param_count());
    for (p, grad) in analytic.iter().enumerate() {
        let n = problem.param_mut(p).numel();
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 0..n {
            let original = problem.param_mut(p).data()[i];
            problem.param_mut(p).data_mut()[i] = original + step;
            let plus = problem.loss();
            problem.param_mut(p).data_mut()[i] = original - step;
            let minus = problem.loss();
            problem.param_mut(p).data_mut()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * step);
            let a = grad.data()[i];
            max_rel = max_rel.max(relative_error(a, numeric));
            max_abs = max_abs.max(libm::fabs(a - numeric));
        }
        params.push(ParamCheck {
            name: problem.param_name(p),
            elements: n,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    Ok(GradCheckReport {
        step,
        tolerance,
        params,
    })
}

struct ClosureProblem<'p, F> {
    f: F,
    params: &'p mut [Tensor],
}

impl<F> ClosureProblem<'_, F>
where
    F: Fn(&mut Graph<'_>, &[NodeId]) -> Result<NodeId, TensorError>,
{
    fn run(&self, with_grads: bool) -> Result<(f64, Vec<Tensor>), TensorError> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = self.params.iter().map(|t| g.param(t)).collect();
        let loss = (self.f)(&mut g, &ids)?;
        let value = g.value(loss).item();
        if !with_grads {
            return Ok((value, Vec::new()));
        }
        let grads = g.backward(loss)?;
        Ok((value, ids.iter().map(|&id| grads.get(id)).collect()))
    }
}

impl<F> Differentiable for ClosureProblem<'_, F>
where
    F: Fn(&mut Graph<'_>, &[NodeId]) -> Result<NodeId, TensorError>,
{
    type Error = TensorError;

    fn param_count(&self) -> usize {
        self.params.len()
    }

    fn param_name(&self, index: usize) -> String {
        alloc::format!("param[{index}]")
    }

    fn param_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.params[index]
    }

    fn loss(&self) -> Result<f64, TensorError> {
        self.run(false).map(|(v, _)| v)
    }

    fn loss_and_grads(&self) -> Result<(f64, Vec<Tensor>), TensorError> {
        self.run(true)
    }
}

/// Gradient check of a graph-building function `f` whose parameters are
/// handed to it as leaf nodes, in `params` order.
pub fn grad_check<F>(
    f: F,
    params: &mut [Tensor],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Graph<'_>, &[NodeId]) -> Result<NodeId, TensorError>,
{
    let mut problem = ClosureProblem { f, params };
    check_problem(&mut problem, step, tolerance)
}
