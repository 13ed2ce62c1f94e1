//! Stand-alone forward kernels. The tape in `tape.rs` has its own fused
//! versions; these are the reference implementations it is tested against.

use super::array::{dot, sigmoid, softmax, DenseArray};
use super::params::ParameterStore;
use super::NumericsError;

/// Gate weights of one GRU. `w_*` are hidden×input, `u_*` hidden×hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParameters {
    pub w_z: DenseArray,
    pub w_r: DenseArray,
    pub w_h: DenseArray,
    pub u_z: DenseArray,
    pub u_r: DenseArray,
    pub u_h: DenseArray,
    pub b_z: DenseArray,
    pub b_r: DenseArray,
    pub b_h: DenseArray,
}

impl GruParameters {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || DenseArray::zeros(&[hidden, input]);
        let u = || DenseArray::zeros(&[hidden, hidden]);
        let b = || DenseArray::zeros(&[hidden]);
        GruParameters { w_z: w(), w_r: w(), w_h: w(), u_z: u(), u_r: u(), u_h: u(), b_z: b(), b_r: b(), b_h: b() }
    }

    pub fn input_size(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.rows()
    }

    /// Splits the fused `{prefix}.input` (3H×I), `{prefix}.recurrent` (3H×H)
    /// and `{prefix}.bias` (3H) arrays, gate order z, r, h.
    pub fn from_store(store: &ParameterStore, prefix: &str) -> Result<Self, NumericsError> {
        let get = |suffix: &str| {
            let name = format!("{prefix}.{suffix}");
            store.by_name(&name).ok_or(NumericsError::MissingParameter(name))
        };
        let (w, u, b) = (get("input")?, get("recurrent")?, get("bias")?);
        let h = u.cols();
        let split = |a: &DenseArray, gate: usize| {
            let c = a.cols();
            let shape = if a.shape().len() == 1 { vec![h] } else { vec![h, c] };
            DenseArray::new(shape, a.data()[gate * h * c..(gate + 1) * h * c].to_vec())
        };
        Ok(GruParameters {
            w_z: split(w, 0)?,
            w_r: split(w, 1)?,
            w_h: split(w, 2)?,
            u_z: split(u, 0)?,
            u_r: split(u, 1)?,
            u_h: split(u, 2)?,
            b_z: split(b, 0)?,
            b_r: split(b, 1)?,
            b_h: split(b, 2)?,
        })
    }
}

/// h' = (1 − z) ⊙ h + z ⊙ h̃ with
/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h).
pub fn gru_cell(input: &DenseArray, prev_hidden: &DenseArray, p: &GruParameters) -> Result<DenseArray, NumericsError> {
    let (x, h) = (input.data(), prev_hidden.data());
    if x.len() != p.input_size() || h.len() != p.hidden_size() {
        return Err(NumericsError::ShapeMismatch(format!(
            "gru expects input {} and hidden {}, got {} and {}",
            p.input_size(),
            p.hidden_size(),
            x.len(),
            h.len()
        )));
    }
    let gate = |w: &DenseArray, u: &DenseArray, b: &DenseArray, hv: &[f64]| -> Result<Vec<f64>, NumericsError> {
        let wx = w.matvec(x)?;
        let uh = u.matvec(hv)?;
        Ok(wx.iter().zip(&uh).zip(b.data()).map(|((a, c), d)| a + c + d).collect())
    };
    let z: Vec<f64> = gate(&p.w_z, &p.u_z, &p.b_z, h)?.into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate(&p.w_r, &p.u_r, &p.b_r, h)?.into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let cand: Vec<f64> = gate(&p.w_h, &p.u_h, &p.b_h, &rh)?.into_iter().map(f64::tanh).collect();
    let out = (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect();
    Ok(DenseArray::vector(out))
}

/// Scaled dot-product attention: Σ_i softmax(q·k_i / √d)_i · v_i.
pub fn attention(query: &DenseArray, keys: &[DenseArray], values: &[DenseArray]) -> Result<DenseArray, NumericsError> {
    if keys.is_empty() {
        return Err(NumericsError::EmptyKeys);
    }
    if keys.len() != values.len() {
        return Err(NumericsError::ShapeMismatch(format!("{} keys but {} values", keys.len(), values.len())));
    }
    let d = query.len();
    if let Some(k) = keys.iter().find(|k| k.len() != d) {
        return Err(NumericsError::ShapeMismatch(format!("key of length {} for query of length {d}", k.len())));
    }
    let width = values[0].len();
    if values.iter().any(|v| v.len() != width) {
        return Err(NumericsError::ShapeMismatch("values differ in length".into()));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let scores: Vec<f64> = keys.iter().map(|k| dot(query.data(), k.data()) * scale).collect();
    let weights = softmax(&scores);
    let mut out = vec![0.0; width];
    for (w, v) in weights.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v.data()) {
            *o += w * x;
        }
    }
    Ok(DenseArray::vector(out))
}
