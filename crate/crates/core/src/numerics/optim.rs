use super::mlp::{Gradient, ParameterSet};
use crate::error::{Error, Result};

/// SGD with classic momentum and a polynomial learning-rate decay.
///
/// The velocity buffers are allocated lazily on the first step and share the
/// parameter set's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub power: f64,
    pub iter: u64,
    pub max_iter: u64,
    velocity: Option<ParameterSet>,
}

impl OptimizerState {
    pub fn new(base_lr: f64, momentum: f64, weight_decay: f64, power: f64, max_iter: u64) -> Result<Self> {
        if !(base_lr.is_finite() && base_lr >= 0.0) {
            return Err(Error::invalid(format!("base_lr must be >= 0, got {base_lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum must be in [0, 1), got {momentum}")));
        }
        if !(weight_decay.is_finite() && weight_decay >= 0.0) {
            return Err(Error::invalid(format!("weight_decay must be >= 0, got {weight_decay}")));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::invalid(format!("power must be > 0, got {power}")));
        }
        Ok(OptimizerState { base_lr, momentum, weight_decay, power, iter: 0, max_iter, velocity: None })
    }

    pub fn velocity(&self) -> Option<&ParameterSet> {
        self.velocity.as_ref()
    }

    pub(crate) fn restore(mut self, iter: u64, velocity: Option<ParameterSet>) -> Result<Self> {
        if iter > self.max_iter {
            return Err(Error::invalid(format!("restored iteration {iter} exceeds max_iter {}", self.max_iter)));
        }
        self.iter = iter;
        self.velocity = velocity;
        Ok(self)
    }

    /// Advance the schedule by one iteration without touching parameters.
    pub fn skip(&mut self) -> Result<()> {
        self.check_room()?;
        self.iter += 1;
        Ok(())
    }

    fn check_room(&self) -> Result<()> {
        if self.iter >= self.max_iter {
            return Err(Error::invalid(format!("optimizer already at max_iter = {}", self.max_iter)));
        }
        Ok(())
    }
}

/// `base_lr · (1 − iter/max_iter)^power`.
pub fn poly_lr(opt: &OptimizerState) -> Result<f64> {
    if opt.max_iter == 0 {
        return Err(Error::invalid("poly_lr needs max_iter > 0"));
    }
    if opt.iter > opt.max_iter {
        return Err(Error::invalid(format!("iteration {} beyond max_iter {}", opt.iter, opt.max_iter)));
    }
    let frac = 1.0 - opt.iter as f64 / opt.max_iter as f64;
    Ok(opt.base_lr * frac.powf(opt.power))
}

/// One momentum step; returns the learning rate that was applied.
///
/// `buf ← m·buf + (grad + wd·param)`, `param ← param − lr·buf`. Weight decay
/// touches weight matrices only, never biases.
pub fn sgd_step(params: &mut ParameterSet, grad: &Gradient, opt: &mut OptimizerState) -> Result<f64> {
    if !params.same_shape(grad) {
        return Err(Error::shape("sgd_step", format!("{:?}", params.sizes()), format!("{:?}", grad.sizes())));
    }
    opt.check_room()?;
    let lr = poly_lr(opt)?;
    let (m, wd) = (opt.momentum, opt.weight_decay);
    let velocity =
        opt.velocity.get_or_insert_with(|| ParameterSet::zeros(&params.sizes()).expect("shape already valid"));
    if !velocity.same_shape(params) {
        return Err(Error::shape(
            "sgd_step velocity",
            format!("{:?}", params.sizes()),
            format!("{:?}", velocity.sizes()),
        ));
    }

    for ((p, g), v) in params.layers_mut().iter_mut().zip(grad.layers()).zip(velocity.layers_mut()) {
        for ((pw, gw), vw) in p.weight.data_mut().iter_mut().zip(g.weight.data()).zip(v.weight.data_mut()) {
            *vw = m * *vw + (gw + wd * *pw);
            *pw -= lr * *vw;
        }
        for ((pb, gb), vb) in p.bias.iter_mut().zip(&g.bias).zip(&mut v.bias) {
            *vb = m * *vb + gb;
            *pb -= lr * *vb;
        }
    }
    opt.iter += 1;
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(sizes: &[usize], v: f64) -> ParameterSet {
        let mut p = ParameterSet::zeros(sizes).unwrap();
        for i in 0..p.num_params() {
            *p.flat_mut(i).unwrap() = v;
        }
        p
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = constant(&[3, 2], 0.4);
        let before = p.clone();
        let g = ParameterSet::zeros(&[3, 2]).unwrap();
        let mut opt = OptimizerState::new(0.1, 0.9, 0.0, 0.9, 10).unwrap();
        sgd_step(&mut p, &g, &mut opt).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn plain_sgd_moves_by_lr_times_grad() {
        let mut p = constant(&[2, 2], 1.0);
        let g = constant(&[2, 2], 0.5);
        let mut opt = OptimizerState::new(0.1, 0.0, 0.0, 0.9, 1 << 40).unwrap();
        sgd_step(&mut p, &g, &mut opt).unwrap();
        for v in p.flatten() {
            assert!((v - (1.0 - 0.1 * 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_momentum_steps_unroll_to_one_plus_one_point_nine() {
        let mut p = constant(&[2, 3], 0.0);
        let g = constant(&[2, 3], 2.0);
        let mut opt = OptimizerState::new(0.01, 0.9, 0.0, 0.9, 1 << 40).unwrap();
        sgd_step(&mut p, &g, &mut opt).unwrap();
        sgd_step(&mut p, &g, &mut opt).unwrap();
        for v in p.flatten() {
            assert!((v + 0.01 * 2.0 * 2.9).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn weight_decay_skips_biases() {
        let mut p = constant(&[2, 2], 1.0);
        let g = ParameterSet::zeros(&[2, 2]).unwrap();
        let mut opt = OptimizerState::new(0.1, 0.0, 0.5, 0.9, 1 << 40).unwrap();
        sgd_step(&mut p, &g, &mut opt).unwrap();
        let l = &p.layers()[0];
        assert!(l.weight.data().iter().all(|&w| (w - 0.95).abs() < 1e-12));
        assert!(l.bias.iter().all(|&b| b == 1.0));
    }

    #[test]
    fn poly_schedule_endpoints_and_midpoint() {
        let mut opt = OptimizerState::new(2.5e-4, 0.9, 5e-4, 0.9, 1000).unwrap();
        assert_eq!(poly_lr(&opt).unwrap(), 2.5e-4);
        opt.iter = 500;
        let mid = 2.5e-4 * (0.9 * 0.5f64.ln()).exp();
        assert!((poly_lr(&opt).unwrap() - mid).abs() < 1e-18);
        assert!((poly_lr(&opt).unwrap() - 1.3397e-4).abs() < 1e-8);
        opt.iter = 1000;
        assert_eq!(poly_lr(&opt).unwrap(), 0.0);
    }

    #[test]
    fn zero_horizon_is_an_error() {
        let opt = OptimizerState::new(1.0, 0.9, 0.0, 0.9, 0).unwrap();
        assert!(poly_lr(&opt).is_err());
    }

    #[test]
    fn stepping_past_horizon_fails() {
        let mut p = constant(&[1, 1], 0.0);
        let g = constant(&[1, 1], 1.0);
        let mut opt = OptimizerState::new(0.1, 0.0, 0.0, 0.9, 1).unwrap();
        sgd_step(&mut p, &g, &mut opt).unwrap();
        assert!(sgd_step(&mut p, &g, &mut opt).is_err());
        assert!(opt.skip().is_err());
    }

    #[test]
    fn mismatched_gradient_shape_fails() {
        let mut p = constant(&[2, 2], 0.0);
        let g = constant(&[2, 3], 0.0);
        let mut opt = OptimizerState::new(0.1, 0.0, 0.0, 0.9, 10).unwrap();
        assert!(matches!(sgd_step(&mut p, &g, &mut opt), Err(Error::Shape { .. })));
    }
}
