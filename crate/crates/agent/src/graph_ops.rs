//! Fused differentiable operations over a [`GraphBatch`] layout. Each one
//! records a single tape node with a hand-written backward pass.

use std::sync::Arc;

use cgrl_core::{Tensor64, Var64};

use crate::error::{AgentError, Result};

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

fn check_rows(x: &Var64<'_>, rows: usize, what: &str) -> Result<usize> {
    let s = x.shape();
    if s.len() != 2 || s[0] != rows {
        return Err(AgentError::Domain(format!("{what}: expected {rows} rows, got shape {s:?}")));
    }
    Ok(s[1])
}

/// `y_g = P_g x_g` for every graph block.
pub fn block_propagate<'t>(x: Var64<'t>, blocks: &Arc<Vec<f64>>, graphs: usize, nodes: usize) -> Result<Var64<'t>> {
    let c = check_rows(&x, graphs * nodes, "block_propagate")?;
    let xv = x.value();
    let apply = move |p: &[f64], src: &[f64], transpose: bool| {
        let mut out = vec![0.0; graphs * nodes * c];
        for g in 0..graphs {
            let pb = &p[g * nodes * nodes..(g + 1) * nodes * nodes];
            for i in 0..nodes {
                let dst = &mut out[(g * nodes + i) * c..(g * nodes + i + 1) * c];
                for j in 0..nodes {
                    let w = if transpose { pb[j * nodes + i] } else { pb[i * nodes + j] };
                    if w == 0.0 {
                        continue;
                    }
                    let s = &src[(g * nodes + j) * c..(g * nodes + j + 1) * c];
                    for k in 0..c {
                        dst[k] += w * s[k];
                    }
                }
            }
        }
        out
    };
    let y = Tensor64::new([graphs * nodes, c], apply(blocks, xv.data(), false))?;
    let p = Arc::clone(blocks);
    Ok(x.tape().record(&[x], y, move |gy| {
        vec![Some(Tensor64::new([graphs * nodes, c], apply(&p, gy.data(), true)).expect("shape"))]
    }))
}

/// Attention weights `[graph][head][i][j]` of a GATv2 layer.
#[derive(Debug, Clone)]
pub struct Attention {
    pub heads: usize,
    pub nodes: usize,
    pub weights: Vec<f64>,
}

impl Attention {
    pub fn get(&self, graph: usize, head: usize, i: usize, j: usize) -> f64 {
        self.weights[((graph * self.heads + head) * self.nodes + i) * self.nodes + j]
    }
}

fn gatv2_forward(
    hl: &[f64],
    hr: &[f64],
    att: &[f64],
    bias: &[f64],
    graphs: usize,
    nodes: usize,
    heads: usize,
    width: usize,
    slope: f64,
) -> (Vec<f64>, Vec<f64>) {
    let d = width / heads;
    let mut out = vec![0.0; graphs * nodes * width];
    let mut alpha = vec![0.0; graphs * heads * nodes * nodes];
    let mut logits = vec![0.0; nodes];
    for g in 0..graphs {
        for m in 0..heads {
            let a = &att[m * d..(m + 1) * d];
            for i in 0..nodes {
                let ri = (g * nodes + i) * width + m * d;
                let mut top = f64::NEG_INFINITY;
                for j in 0..nodes {
                    let b = bias[(g * nodes + i) * nodes + j];
                    if b == f64::NEG_INFINITY {
                        logits[j] = b;
                        continue;
                    }
                    let rj = (g * nodes + j) * width + m * d;
                    let mut e = b;
                    for k in 0..d {
                        e += a[k] * leaky(hl[ri + k] + hr[rj + k], slope);
                    }
                    logits[j] = e;
                    top = top.max(e);
                }
                let arow = &mut alpha[((g * heads + m) * nodes + i) * nodes..][..nodes];
                let mut z = 0.0;
                for j in 0..nodes {
                    let w = if logits[j] == f64::NEG_INFINITY { 0.0 } else { (logits[j] - top).exp() };
                    arow[j] = w;
                    z += w;
                }
                for j in 0..nodes {
                    arow[j] /= z;
                    if arow[j] == 0.0 {
                        continue;
                    }
                    let rj = (g * nodes + j) * width + m * d;
                    for k in 0..d {
                        out[ri + k] += arow[j] * hr[rj + k];
                    }
                }
            }
        }
    }
    (out, alpha)
}

/// GATv2 aggregation. `hl` and `hr` are the left and right projections
/// (`rows × heads·d`), `att` the per-head attention vectors (`1 × heads·d`).
/// Head outputs are concatenated. Returns the output and the weights.
pub fn gatv2<'t>(
    hl: Var64<'t>,
    hr: Var64<'t>,
    att: Var64<'t>,
    bias: &Arc<Vec<f64>>,
    graphs: usize,
    nodes: usize,
    heads: usize,
    slope: f64,
) -> Result<(Var64<'t>, Attention)> {
    let width = check_rows(&hl, graphs * nodes, "gatv2 left")?;
    if check_rows(&hr, graphs * nodes, "gatv2 right")? != width || att.shape() != [1, width] || width % heads != 0 {
        return Err(AgentError::Domain("gatv2 operand widths disagree".into()));
    }
    let (hlv, hrv, av) = (hl.value(), hr.value(), att.value());
    let (out, alpha) = gatv2_forward(hlv.data(), hrv.data(), av.data(), bias, graphs, nodes, heads, width, slope);
    let attention = Attention { heads, nodes, weights: alpha.clone() };
    let y = Tensor64::new([graphs * nodes, width], out)?;
    let d = width / heads;
    let rows = graphs * nodes;
    let var = hl.tape().record(&[hl, hr, att], y, move |gout| {
        let (hl, hr, a, go) = (hlv.data(), hrv.data(), av.data(), gout.data());
        let mut ghl = vec![0.0; rows * width];
        let mut ghr = vec![0.0; rows * width];
        let mut ga = vec![0.0; width];
        let mut ge = vec![0.0; nodes];
        for g in 0..graphs {
            for m in 0..heads {
                let am = &a[m * d..(m + 1) * d];
                for i in 0..nodes {
                    let ri = (g * nodes + i) * width + m * d;
                    let arow = &alpha[((g * heads + m) * nodes + i) * nodes..][..nodes];
                    // dL/dα_ij = gout_i · hr_j, then through the softmax.
                    let mut mean = 0.0;
                    for j in 0..nodes {
                        if arow[j] == 0.0 {
                            ge[j] = 0.0;
                            continue;
                        }
                        let rj = (g * nodes + j) * width + m * d;
                        let mut s = 0.0;
                        for k in 0..d {
                            s += go[ri + k] * hr[rj + k];
                            ghr[rj + k] += arow[j] * go[ri + k];
                        }
                        ge[j] = s;
                        mean += arow[j] * s;
                    }
                    for j in 0..nodes {
                        if arow[j] == 0.0 {
                            continue;
                        }
                        let e = arow[j] * (ge[j] - mean);
                        let rj = (g * nodes + j) * width + m * d;
                        for k in 0..d {
                            let u = hl[ri + k] + hr[rj + k];
                            ga[m * d + k] += e * leaky(u, slope);
                            let gz = e * am[k] * leaky_grad(u, slope);
                            ghl[ri + k] += gz;
                            ghr[rj + k] += gz;
                        }
                    }
                }
            }
        }
        vec![
            Some(Tensor64::new([rows, width], ghl).expect("shape")),
            Some(Tensor64::new([rows, width], ghr).expect("shape")),
            Some(Tensor64::new([1, width], ga).expect("shape")),
        ]
    });
    Ok((var, attention))
}

/// Mean over present nodes of each graph: `graphs × c`. A graph without
/// present nodes is an error.
pub fn masked_mean_pool<'t>(x: Var64<'t>, present: &Arc<Vec<bool>>, graphs: usize, nodes: usize) -> Result<Var64<'t>> {
    let c = check_rows(&x, graphs * nodes, "masked_mean_pool")?;
    let mut inv = Vec::with_capacity(graphs);
    for g in 0..graphs {
        let k = present[g * nodes..(g + 1) * nodes].iter().filter(|&&p| p).count();
        if k == 0 {
            return Err(AgentError::Domain(format!("graph {g} has no present node to pool")));
        }
        inv.push(1.0 / k as f64);
    }
    let xv = x.value();
    let mut out = vec![0.0; graphs * c];
    for g in 0..graphs {
        for i in 0..nodes {
            if present[g * nodes + i] {
                for k in 0..c {
                    out[g * c + k] += xv.data()[(g * nodes + i) * c + k];
                }
            }
        }
        for k in 0..c {
            out[g * c + k] *= inv[g];
        }
    }
    let mask = Arc::clone(present);
    Ok(x.tape().record(&[x], Tensor64::new([graphs, c], out)?, move |gy| {
        let mut gx = vec![0.0; graphs * nodes * c];
        for g in 0..graphs {
            for i in 0..nodes {
                if mask[g * nodes + i] {
                    for k in 0..c {
                        gx[(g * nodes + i) * c + k] = gy.data()[g * c + k] * inv[g];
                    }
                }
            }
        }
        vec![Some(Tensor64::new([graphs * nodes, c], gx).expect("shape"))]
    }))
}

/// Centered advantages `(A_i − A_0) − mean_j(A_j − A_0)`. Measuring from
/// `A_0` makes a constant row produce exact zeros.
pub fn centered_advantage(row: &[f64]) -> Vec<f64> {
    let k = row.len() as f64;
    let diffs: Vec<f64> = row.iter().map(|&a| a - row[0]).collect();
    let mean = diffs.iter().sum::<f64>() / k;
    diffs.iter().map(|&d| d - mean).collect()
}

/// Dueling aggregation `Q = V + A − mean(A)` with `v: b × 1`, `adv: b × k`.
pub fn dueling<'t>(v: Var64<'t>, adv: Var64<'t>) -> Result<Var64<'t>> {
    let (vs, s) = (v.shape(), adv.shape());
    if vs.len() != 2 || s.len() != 2 || vs != [s[0], 1] {
        return Err(AgentError::Domain(format!("dueling shapes {vs:?} and {s:?}")));
    }
    let (b, k) = (s[0], s[1]);
    let (vv, av) = (v.value(), adv.value());
    let mut q = Vec::with_capacity(b * k);
    for r in 0..b {
        let base = vv.data()[r];
        q.extend(centered_advantage(&av.data()[r * k..(r + 1) * k]).into_iter().map(|c| base + c));
    }
    Ok(v.tape().record(&[v, adv], Tensor64::new([b, k], q)?, move |gq| {
        let mut gv = vec![0.0; b];
        let mut ga = vec![0.0; b * k];
        for r in 0..b {
            let row = &gq.data()[r * k..(r + 1) * k];
            let total: f64 = row.iter().sum();
            gv[r] = total;
            for i in 0..k {
                ga[r * k + i] = row[i] - total / k as f64;
            }
        }
        vec![
            Some(Tensor64::new([b, 1], gv).expect("shape")),
            Some(Tensor64::new([b, k], ga).expect("shape")),
        ]
    }))
}

/// Per-graph inner products `Z_g Z_gᵀ` stacked: `graphs·nodes × nodes`.
pub fn block_outer<'t>(z: Var64<'t>, graphs: usize, nodes: usize) -> Result<Var64<'t>> {
    let c = check_rows(&z, graphs * nodes, "block_outer")?;
    let zv = z.value();
    let zd = zv.data();
    let mut out = vec![0.0; graphs * nodes * nodes];
    for g in 0..graphs {
        for i in 0..nodes {
            for j in 0..nodes {
                let (ri, rj) = ((g * nodes + i) * c, (g * nodes + j) * c);
                out[(g * nodes + i) * nodes + j] = (0..c).map(|k| zd[ri + k] * zd[rj + k]).sum();
            }
        }
    }
    let zc = Arc::clone(&zv);
    Ok(z.tape().record(&[z], Tensor64::new([graphs * nodes, nodes], out)?, move |gy| {
        let (zd, gd) = (zc.data(), gy.data());
        let mut gz = vec![0.0; graphs * nodes * c];
        for g in 0..graphs {
            for i in 0..nodes {
                for j in 0..nodes {
                    let w = gd[(g * nodes + i) * nodes + j] + gd[(g * nodes + j) * nodes + i];
                    if w == 0.0 {
                        continue;
                    }
                    for k in 0..c {
                        gz[(g * nodes + i) * c + k] += w * zd[(g * nodes + j) * c + k];
                    }
                }
            }
        }
        vec![Some(Tensor64::new([graphs * nodes, c], gz).expect("shape"))]
    }))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `Σ w (softplus(l) − y l)`, the weighted binary cross-entropy of logits.
pub fn weighted_bce_with_logits<'t>(logits: Var64<'t>, labels: &Tensor64, weights: &Tensor64) -> Result<Var64<'t>> {
    let lv = logits.value();
    if lv.shape() != labels.shape() || lv.shape() != weights.shape() {
        return Err(AgentError::Domain("bce operands must share a shape".into()));
    }
    let total: f64 = lv
        .data()
        .iter()
        .zip(labels.data())
        .zip(weights.data())
        .map(|((&l, &y), &w)| if w == 0.0 { 0.0 } else { w * (softplus(l) - y * l) })
        .sum();
    let (y, w) = (labels.clone(), weights.clone());
    Ok(logits.tape().record(&[logits], Tensor64::scalar(total), move |g| {
        let s = g.data()[0];
        let grad = lv.zip_map(&y, |l, y| cgrl_core::sigmoid_scalar(l) - y).expect("shape");
        vec![Some(grad.zip_map(&w, |d, w| s * w * d).expect("shape"))]
    }))
}
