//! Hand-written forward and backward passes. Each layer holds indices into a
//! [`ParamSet`] rather than the tensors themselves.

use rand_chacha::ChaCha8Rng;

use super::params::{Grads, Init, ParamSet};
use crate::scalar::{sigmoid, Real};

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

/// `y = W x + b`, `W` of shape `[output, input]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn init<T: Real>(
        ps: &mut ParamSet<T>,
        prefix: &str,
        input: usize,
        output: usize,
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> Dense {
        let w = ps.add_weight(
            &format!("{prefix}.W"),
            vec![output, input],
            input,
            output,
            init,
            true,
            rng,
        );
        let b = ps.add(
            &format!("{prefix}.b"),
            vec![output],
            vec![T::zero(); output],
            false,
        );
        Dense {
            w,
            b,
            input,
            output,
        }
    }

    pub fn forward<T: Real>(&self, ps: &ParamSet<T>, x: &[T]) -> Vec<T> {
        let w = &ps.params[self.w].data;
        let b = &ps.params[self.b].data;
        (0..self.output)
            .map(|o| b[o] + dot(&w[o * self.input..(o + 1) * self.input], x))
            .collect()
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        dy: &[T],
        grads: &mut Grads<T>,
    ) -> Vec<T> {
        let w = &ps.params[self.w].data;
        let mut dx = vec![T::zero(); self.input];
        for o in 0..self.output {
            let d = dy[o];
            if d == T::zero() {
                continue;
            }
            grads[self.b][o] += d;
            let row = o * self.input;
            let gw = &mut grads[self.w][row..row + self.input];
            for i in 0..self.input {
                gw[i] += d * x[i];
                dx[i] += d * w[row + i];
            }
        }
        dx
    }
}

/// Standard LSTM cell, gate order input, forget, candidate, output.
/// `W: [4H, I]`, `U: [4H, H]`, `b: [4H]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub w: usize,
    pub u: usize,
    pub b: usize,
    pub input: usize,
    pub hidden: usize,
}

pub struct LstmCache<T> {
    steps: usize,
    /// Activated gates per step, `[steps, 4H]`.
    gates: Vec<T>,
    /// Cell states `[steps + 1, H]`, row 0 is the initial zero state.
    c: Vec<T>,
    /// Hidden states `[steps + 1, H]`.
    h: Vec<T>,
}

impl<T: Real> LstmCache<T> {
    pub fn last_hidden(&self, hidden: usize) -> &[T] {
        &self.h[self.steps * hidden..(self.steps + 1) * hidden]
    }
}

impl Lstm {
    pub fn init<T: Real>(
        ps: &mut ParamSet<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> Lstm {
        let g = 4 * hidden;
        let w = ps.add_weight(
            &format!("{prefix}.W"),
            vec![g, input],
            input,
            g,
            init,
            false,
            rng,
        );
        let u = ps.add_weight(
            &format!("{prefix}.U"),
            vec![g, hidden],
            hidden,
            g,
            init,
            false,
            rng,
        );
        let mut bias = vec![T::zero(); g];
        if init == Init::Glorot {
            for v in &mut bias[hidden..2 * hidden] {
                *v = T::one();
            }
        }
        let b = ps.add(&format!("{prefix}.b"), vec![g], bias, false);
        Lstm {
            w,
            u,
            b,
            input,
            hidden,
        }
    }

    /// Runs over `x` of shape `[steps, input]`.
    pub fn forward<T: Real>(&self, ps: &ParamSet<T>, x: &[T]) -> LstmCache<T> {
        let (hd, id) = (self.hidden, self.input);
        let steps = x.len() / id;
        let w = &ps.params[self.w].data;
        let u = &ps.params[self.u].data;
        let b = &ps.params[self.b].data;
        let mut gates = vec![T::zero(); steps * 4 * hd];
        let mut c = vec![T::zero(); (steps + 1) * hd];
        let mut h = vec![T::zero(); (steps + 1) * hd];
        let mut a = vec![T::zero(); 4 * hd];
        for t in 0..steps {
            let xt = &x[t * id..(t + 1) * id];
            let hp = &h[t * hd..(t + 1) * hd];
            for r in 0..4 * hd {
                a[r] = b[r] + dot(&w[r * id..(r + 1) * id], xt) + dot(&u[r * hd..(r + 1) * hd], hp);
            }
            let g = &mut gates[t * 4 * hd..(t + 1) * 4 * hd];
            for j in 0..hd {
                g[j] = sigmoid(a[j]);
                g[hd + j] = sigmoid(a[hd + j]);
                g[2 * hd + j] = a[2 * hd + j].tanh();
                g[3 * hd + j] = sigmoid(a[3 * hd + j]);
            }
            for j in 0..hd {
                let cn = g[hd + j] * c[t * hd + j] + g[j] * g[2 * hd + j];
                c[(t + 1) * hd + j] = cn;
                h[(t + 1) * hd + j] = g[3 * hd + j] * cn.tanh();
            }
        }
        LstmCache { steps, gates, c, h }
    }

    /// Backpropagates a gradient on the final hidden state through time.
    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        cache: &LstmCache<T>,
        dh_last: &[T],
        grads: &mut Grads<T>,
    ) {
        let (hd, id) = (self.hidden, self.input);
        let u = &ps.params[self.u].data;
        let mut dh = dh_last.to_vec();
        let mut dc = vec![T::zero(); hd];
        let mut da = vec![T::zero(); 4 * hd];
        for t in (0..cache.steps).rev() {
            let g = &cache.gates[t * 4 * hd..(t + 1) * 4 * hd];
            let cp = &cache.c[t * hd..(t + 1) * hd];
            let cn = &cache.c[(t + 1) * hd..(t + 2) * hd];
            for j in 0..hd {
                let (i, f, gg, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
                let tc = cn[j].tanh();
                let d_o = dh[j] * tc;
                let dcj = dc[j] + dh[j] * o * (T::one() - tc * tc);
                da[j] = dcj * gg * i * (T::one() - i);
                da[hd + j] = dcj * cp[j] * f * (T::one() - f);
                da[2 * hd + j] = dcj * i * (T::one() - gg * gg);
                da[3 * hd + j] = d_o * o * (T::one() - o);
                dc[j] = dcj * f;
            }
            let xt = &x[t * id..(t + 1) * id];
            let hp = &cache.h[t * hd..(t + 1) * hd];
            for r in 0..4 * hd {
                let d = da[r];
                grads[self.b][r] += d;
                let gw = &mut grads[self.w][r * id..(r + 1) * id];
                for k in 0..id {
                    gw[k] += d * xt[k];
                }
                let gu = &mut grads[self.u][r * hd..(r + 1) * hd];
                for k in 0..hd {
                    gu[k] += d * hp[k];
                }
            }
            for k in 0..hd {
                let mut s = T::zero();
                for r in 0..4 * hd {
                    s += u[r * hd + k] * da[r];
                }
                dh[k] = s;
            }
        }
    }
}

/// Valid 1-D convolution over time, ReLU, then global max pooling.
/// `K: [filters, kernel, input]`, `b: [filters]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv1d {
    pub k: usize,
    pub b: usize,
    pub input: usize,
    pub filters: usize,
    pub kernel: usize,
}

pub struct ConvCache<T> {
    /// Winning position per filter.
    argmax: Vec<usize>,
    /// Pre-activation at the winning position.
    pre: Vec<T>,
}

impl Conv1d {
    pub fn init<T: Real>(
        ps: &mut ParamSet<T>,
        prefix: &str,
        input: usize,
        filters: usize,
        kernel: usize,
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> Conv1d {
        let k = ps.add_weight(
            &format!("{prefix}.K"),
            vec![filters, kernel, input],
            kernel * input,
            filters,
            init,
            false,
            rng,
        );
        let b = ps.add(
            &format!("{prefix}.b"),
            vec![filters],
            vec![T::zero(); filters],
            false,
        );
        Conv1d {
            k,
            b,
            input,
            filters,
            kernel,
        }
    }

    /// Returns the pooled features (length `filters`).
    pub fn forward<T: Real>(&self, ps: &ParamSet<T>, x: &[T]) -> (Vec<T>, ConvCache<T>) {
        let steps = x.len() / self.input;
        assert!(steps >= self.kernel, "sequence shorter than the kernel");
        let positions = steps - self.kernel + 1;
        let span = self.kernel * self.input;
        let kw = &ps.params[self.k].data;
        let b = &ps.params[self.b].data;
        let mut out = vec![T::zero(); self.filters];
        let mut argmax = vec![0; self.filters];
        let mut pre = vec![T::zero(); self.filters];
        for f in 0..self.filters {
            let kf = &kw[f * span..(f + 1) * span];
            let mut best = T::neg_infinity();
            for p in 0..positions {
                let y = b[f] + dot(kf, &x[p * self.input..p * self.input + span]);
                if y > best {
                    best = y;
                    argmax[f] = p;
                }
            }
            pre[f] = best;
            out[f] = best.max(T::zero());
        }
        (out, ConvCache { argmax, pre })
    }

    pub fn backward<T: Real>(
        &self,
        x: &[T],
        cache: &ConvCache<T>,
        dout: &[T],
        grads: &mut Grads<T>,
    ) {
        let span = self.kernel * self.input;
        for f in 0..self.filters {
            if cache.pre[f] <= T::zero() {
                continue;
            }
            let d = dout[f];
            grads[self.b][f] += d;
            let p = cache.argmax[f];
            let xs = &x[p * self.input..p * self.input + span];
            let g = &mut grads[self.k][f * span..(f + 1) * span];
            for k in 0..span {
                g[k] += d * xs[k];
            }
        }
    }
}
