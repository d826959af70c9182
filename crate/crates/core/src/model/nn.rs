use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
}

/// Fully connected net: tanh hidden layers, linear scalar output.
/// With no layers the net is the zero function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    pub n_in: usize,
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

impl NeuralNet {
    pub fn empty(n_in: usize) -> Self {
        Self { n_in, activation: Activation::Tanh, layers: vec![] }
    }

    /// All-zero net with the given hidden widths and a scalar output.
    pub fn zeros(n_in: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::new();
        let mut prev = n_in;
        for &h in hidden.iter().chain(std::iter::once(&1)) {
            layers.push(Layer { w: DMatrix::zeros(h, prev), b: DVector::zeros(h) });
            prev = h;
        }
        Self { n_in, activation: Activation::Tanh, layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let n_in = layers.first().map(|l| l.w.ncols()).unwrap_or(0);
        let mut prev = n_in;
        for l in &layers {
            dim("layer input width", prev, l.w.ncols())?;
            dim("layer bias length", l.w.nrows(), l.b.len())?;
            prev = l.w.nrows();
        }
        if !layers.is_empty() && prev != 1 {
            return Err(Error::Invalid("network output must be scalar".into()));
        }
        Ok(Self { n_in, activation: Activation::Tanh, layers })
    }

    /// Hidden weights U[−1/√fan_in, 1/√fan_in], hidden biases U[−0.5, 0.5];
    /// the output layer is left at zero.
    pub fn randomize_hidden<R: Rng>(&mut self, rng: &mut R) {
        let n = self.layers.len();
        for l in self.layers.iter_mut().take(n.saturating_sub(1)) {
            let a = 1.0 / (l.w.ncols() as f64).sqrt();
            l.w.iter_mut().for_each(|v| *v = rng.random_range(-a..=a));
            l.b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..=0.5));
        }
        if let Some(out) = self.layers.last_mut() {
            out.w.fill(0.0);
            out.b.fill(0.0);
        }
    }

    pub fn hidden_count(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Width of the last hidden layer (n_in when there is none).
    pub fn last_hidden_width(&self) -> usize {
        match self.layers.len() {
            0 => 0,
            1 => self.n_in,
            n => self.layers[n - 2].w.nrows(),
        }
    }

    /// Flat parameters: per layer col(W_l) then B_l.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(l.w.as_slice());
            p.extend_from_slice(l.b.as_slice());
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        dim("network parameter count", self.n_params(), p.len())?;
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Offset of the output layer's parameters in the flat vector.
    pub fn output_offset(&self) -> usize {
        let n = self.layers.len();
        self.layers.iter().take(n.saturating_sub(1)).map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        if self.layers.is_empty() {
            return Ok(0.0);
        }
        dim("network input width", self.n_in, x.len())?;
        let n = self.layers.len();
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * &a + &l.b;
            if i + 1 < n {
                z.apply(|v| *v = v.tanh());
            }
            a = z;
        }
        Ok(a[0])
    }

    /// Hidden activations for a batch; element l is a_l (N × n_l),
    /// element 0 is the input itself.
    fn forward_rows(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let n = self.layers.len();
        let mut acts = vec![x.clone()];
        for l in self.layers.iter().take(n - 1) {
            let prev = acts.last().unwrap();
            let mut z = prev * l.w.transpose();
            for mut row in z.row_iter_mut() {
                row += l.b.transpose();
            }
            z.apply(|v| *v = v.tanh());
            acts.push(z);
        }
        acts
    }

    /// Outputs for each row of `x`.
    pub fn eval_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if self.layers.is_empty() {
            return Ok(DVector::zeros(x.nrows()));
        }
        dim("network input width", self.n_in, x.ncols())?;
        let acts = self.forward_rows(x);
        let out = self.layers.last().unwrap();
        let mut y = acts.last().unwrap() * out.w.row(0).transpose();
        y.add_scalar_mut(out.b[0]);
        Ok(y)
    }

    /// Outputs and parameter Jacobian (N × n_params) for each row of `x`.
    pub fn jacobian_params_rows(&self, x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let nrows = x.nrows();
        if self.layers.is_empty() {
            return Ok((DVector::zeros(nrows), DMatrix::zeros(nrows, 0)));
        }
        dim("network input width", self.n_in, x.ncols())?;
        let acts = self.forward_rows(x);
        let nl = self.layers.len();
        let mut jac = DMatrix::zeros(nrows, self.n_params());
        // offsets per layer
        let mut offs = Vec::with_capacity(nl);
        let mut o = 0;
        for l in &self.layers {
            offs.push(o);
            o += l.w.len() + l.b.len();
        }
        let out = &self.layers[nl - 1];
        let a_last = &acts[nl - 1];
        let mut y = a_last * out.w.row(0).transpose();
        y.add_scalar_mut(out.b[0]);
        // output layer: ∂/∂W_{L+1}[0, j] = a_L[:, j]; ∂/∂B = 1
        for j in 0..out.w.ncols() {
            jac.column_mut(offs[nl - 1] + j).copy_from(&a_last.column(j));
        }
        jac.column_mut(offs[nl - 1] + out.w.len()).fill(1.0);
        // delta for the last hidden layer: N × n_L
        let mut delta = DMatrix::from_fn(nrows, out.w.ncols(), |_, j| out.w[(0, j)]);
        for l in (0..nl - 1).rev() {
            let a = &acts[l + 1];
            delta.zip_apply(a, |d, av| *d *= 1.0 - av * av);
            let layer = &self.layers[l];
            let a_in = &acts[l];
            let (rows, cols) = layer.w.shape();
            for c in 0..cols {
                for r in 0..rows {
                    let mut col = jac.column_mut(offs[l] + r + c * rows);
                    col.copy_from(&delta.column(r));
                    col.component_mul_assign(&a_in.column(c));
                }
            }
            for r in 0..rows {
                jac.column_mut(offs[l] + layer.w.len() + r).copy_from(&delta.column(r));
            }
            if l > 0 {
                delta = &delta * &layer.w;
            }
        }
        Ok((y, jac))
    }

    pub fn jacobian_params(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (_, j) = self.jacobian_params_rows(&DMatrix::from_row_slice(1, x.len(), x.as_slice()))?;
        Ok(j.row(0).transpose())
    }

    /// ∂f/∂x = W_{L+1} diag(α'_L) ⋯ diag(α'_1) W_1 at `x`.
    pub fn jacobian_input(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.layers.is_empty() {
            return Ok(DVector::zeros(x.len()));
        }
        dim("network input width", self.n_in, x.len())?;
        let n = self.layers.len();
        let mut a = x.clone();
        let mut jac = DMatrix::identity(self.n_in, self.n_in);
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * &a + &l.b;
            jac = &l.w * &jac;
            if i + 1 < n {
                z.apply(|v| *v = v.tanh());
                for r in 0..jac.nrows() {
                    let d = 1.0 - z[r] * z[r];
                    jac.row_mut(r).scale_mut(d);
                }
            }
            a = z;
        }
        Ok(jac.row(0).transpose())
    }

    /// Elementwise Π|W_l| (row vector, returned as a column).
    pub fn abs_weight_product(&self) -> DVector<f64> {
        if self.layers.is_empty() {
            return DVector::zeros(self.n_in);
        }
        let mut k = DMatrix::identity(self.n_in, self.n_in);
        for l in &self.layers {
            k = l.w.abs() * k;
        }
        k.row(0).transpose()
    }
}
