use crate::real::Real;
use rand::Rng;

/// Dense layer, weights stored output-major: w[o * in_dim + i].
#[derive(Debug, Clone)]
pub struct Linear<R> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<R>,
    pub b: Vec<R>,
}

impl<R: Real> Linear<R> {
    /// Kaiming-style uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)),
    /// zero bias.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        Linear {
            in_dim,
            out_dim,
            w: (0..in_dim * out_dim)
                .map(|_| R::from_f64(rng.gen_range(-bound..bound)))
                .collect(),
            b: vec![R::zero(); out_dim],
        }
    }

    #[inline]
    pub fn forward(&self, x: &[R], out: &mut [R]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, (row, &b)) in out
            .iter_mut()
            .zip(self.w.chunks_exact(self.in_dim).zip(&self.b))
        {
            *o = b + dot(row, x);
        }
    }

    /// Accumulates parameter gradients and writes dL/dx.
    #[inline]
    pub fn backward(&self, x: &[R], d_out: &[R], d_x: &mut [R], grad: &mut LinearGrad<R>) {
        d_x.fill(R::zero());
        for (o, d) in d_out.iter().enumerate() {
            let d = *d;
            if d == R::zero() {
                continue; // ReLU-gated rows contribute nothing
            }
            grad.b[o] += d;
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (g, &xi) in grow.iter_mut().zip(x) {
                *g += d * xi;
            }
            for (dx, &w) in d_x.iter_mut().zip(row) {
                *dx += d * w;
            }
        }
    }
}

/// Four-lane unrolled dot product; the fixed lane split keeps results
/// deterministic while letting the reduction vectorize.
#[inline(always)]
fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut lanes = [R::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (qa, qb) in (&mut ca).zip(&mut cb) {
        lanes[0] += qa[0] * qb[0];
        lanes[1] += qa[1] * qb[1];
        lanes[2] += qa[2] * qb[2];
        lanes[3] += qa[3] * qb[3];
    }
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        lanes[0] += x * y;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3])
}

#[derive(Debug, Clone)]
pub struct LinearGrad<R> {
    pub w: Vec<R>,
    pub b: Vec<R>,
}

/// Fully-connected net with ReLU between layers and a linear final layer.
#[derive(Debug, Clone)]
pub struct Mlp<R> {
    pub layers: Vec<Linear<R>>,
}

pub type MlpGrads<R> = Vec<LinearGrad<R>>;

/// Per-layer activation storage reused across forward/backward calls.
#[derive(Debug, Clone)]
pub struct MlpWorkspace<R> {
    /// acts[k] holds the post-activation output of layer k.
    pub acts: Vec<Vec<R>>,
    pub d_buf: Vec<Vec<R>>,
}

impl<R: Real> Mlp<R> {
    pub fn init(dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn workspace(&self) -> MlpWorkspace<R> {
        MlpWorkspace {
            acts: self
                .layers
                .iter()
                .map(|l| vec![R::zero(); l.out_dim])
                .collect(),
            d_buf: self
                .layers
                .iter()
                .map(|l| vec![R::zero(); l.in_dim])
                .collect(),
        }
    }

    pub fn grads(&self) -> MlpGrads<R> {
        self.layers
            .iter()
            .map(|l| LinearGrad {
                w: vec![R::zero(); l.w.len()],
                b: vec![R::zero(); l.b.len()],
            })
            .collect()
    }

    /// Forward pass; the final layer output lands in `ws.acts.last()`.
    pub fn forward<'w>(&self, x: &[R], ws: &'w mut MlpWorkspace<R>) -> &'w [R] {
        let n = self.layers.len();
        for k in 0..n {
            // split so the previous activation can be read while writing
            let (head, tail) = ws.acts.split_at_mut(k);
            let input: &[R] = if k == 0 { x } else { &head[k - 1] };
            self.layers[k].forward(input, &mut tail[0]);
            if k + 1 < n {
                for v in tail[0].iter_mut() {
                    if *v < R::zero() {
                        *v = R::zero();
                    }
                }
            }
        }
        ws.acts.last().unwrap()
    }

    /// Backward pass for the most recent `forward` on the same workspace.
    /// Writes dL/dx into `d_x` and accumulates parameter grads.
    pub fn backward(
        &self,
        x: &[R],
        d_out: &[R],
        ws: &mut MlpWorkspace<R>,
        d_x: &mut [R],
        grads: &mut MlpGrads<R>,
    ) {
        let n = self.layers.len();
        let MlpWorkspace { acts, d_buf } = ws;
        for k in (0..n).rev() {
            let (left, right) = d_buf.split_at_mut(k + 1);
            let d_cur: &[R] = if k == n - 1 { d_out } else { &right[0] };
            let input: &[R] = if k == 0 { x } else { &acts[k - 1] };
            self.layers[k].backward(input, d_cur, &mut left[k], &mut grads[k]);
            if k > 0 {
                // gate by the stored post-ReLU activation of layer k-1
                for (d, &a) in left[k].iter_mut().zip(acts[k - 1].iter()) {
                    if a <= R::zero() {
                        *d = R::zero();
                    }
                }
            }
        }
        d_x.copy_from_slice(&d_buf[0]);
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}
