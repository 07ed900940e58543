use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

/// One LSTM direction. Gate blocks are stacked as input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    /// (4H, I)
    pub w_ih: Array2<f64>,
    /// (4H, H)
    pub w_hh: Array2<f64>,
    /// (4H)
    pub b: Array1<f64>,
}

/// Activations of a batched forward pass, rows grouped by step in processing order.
pub struct LstmTrace {
    inputs: Array2<f64>,
    gates: Array2<f64>,
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    hidden: Array2<f64>,
    steps: usize,
    batch: usize,
}

impl LstmTrace {
    /// Hidden state after the last processed step, (B, H).
    pub fn final_hidden(&self) -> ArrayView2<'_, f64> {
        self.hidden.slice(s![(self.steps - 1) * self.batch.., ..])
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmWeights {
            w_ih: Array2::zeros((4 * hidden, input)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let mut w = Self::zeros(input, hidden);
        w.w_ih.mapv_inplace(|_| rng.gen_range(-k..k));
        w.w_hh.mapv_inplace(|_| rng.gen_range(-k..k));
        w.b.mapv_inplace(|_| rng.gen_range(-k..k));
        w.b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        w
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.ncols()
    }

    /// Run `steps` steps over a batch; `inputs` is (steps * batch, I) with the
    /// rows of step s at `s * batch ..`.
    pub fn forward(&self, inputs: Array2<f64>, steps: usize, batch: usize) -> LstmTrace {
        let h = self.hidden_size();
        let g4 = 4 * h;
        let mut gates = inputs.dot(&self.w_ih.t());
        gates += &self.b;
        let n = steps * batch;
        let mut cells = vec![0.0; n * h];
        let mut tanh_cells = vec![0.0; n * h];
        let mut hidden = vec![0.0; n * h];
        // Row-major copy of W_hh^T; the matrix product packs it far faster than a transposed view.
        let w_hh_t = self.w_hh.t().as_standard_layout().into_owned();
        for step in 0..steps {
            let rows = step * batch..(step + 1) * batch;
            if step > 0 {
                let prev = ArrayView2::from_shape((batch, h), &hidden[(rows.start - batch) * h..rows.start * h]).expect("sized");
                let mut z = gates.slice_mut(s![rows.clone(), ..]);
                general_mat_mul(1.0, &prev, &w_hh_t, 1.0, &mut z);
            }
            let gs = gates.as_slice_mut().expect("standard layout");
            for r in rows {
                let z = &mut gs[r * g4..(r + 1) * g4];
                for k in 0..h {
                    let i = sigmoid(z[k]);
                    let f = sigmoid(z[h + k]);
                    let g = z[2 * h + k].tanh();
                    let o = sigmoid(z[3 * h + k]);
                    z[k] = i;
                    z[h + k] = f;
                    z[2 * h + k] = g;
                    z[3 * h + k] = o;
                    let c_prev = if step > 0 { cells[(r - batch) * h + k] } else { 0.0 };
                    let c = f * c_prev + i * g;
                    let tc = c.tanh();
                    cells[r * h + k] = c;
                    tanh_cells[r * h + k] = tc;
                    hidden[r * h + k] = o * tc;
                }
            }
        }
        let shape = (n, h);
        LstmTrace {
            inputs,
            gates,
            cells: Array2::from_shape_vec(shape, cells).expect("sized"),
            tanh_cells: Array2::from_shape_vec(shape, tanh_cells).expect("sized"),
            hidden: Array2::from_shape_vec(shape, hidden).expect("sized"),
            steps,
            batch,
        }
    }

    /// Backpropagation through time from a gradient on the final hidden state.
    /// Parameter gradients are added into `grads`.
    pub fn backward(&self, trace: &LstmTrace, d_final: ArrayView2<'_, f64>, grads: &mut LstmWeights) {
        let h = self.hidden_size();
        let g4 = 4 * h;
        let (steps, batch) = (trace.steps, trace.batch);
        let gates = trace.gates.as_slice().expect("standard layout");
        let cells = trace.cells.as_slice().expect("standard layout");
        let tanh_cells = trace.tanh_cells.as_slice().expect("standard layout");
        let mut dz = Array2::<f64>::zeros((steps * batch, g4));
        let mut dh = d_final.to_owned();
        let mut dc = vec![0.0; batch * h];
        for step in (0..steps).rev() {
            for b in 0..batch {
                let r = step * batch + b;
                let gz = &gates[r * g4..(r + 1) * g4];
                let out = &mut dz.as_slice_mut().expect("standard layout")[r * g4..(r + 1) * g4];
                for k in 0..h {
                    let (i, f, g, o) = (gz[k], gz[h + k], gz[2 * h + k], gz[3 * h + k]);
                    let tc = tanh_cells[r * h + k];
                    let c_prev = if step > 0 { cells[(r - batch) * h + k] } else { 0.0 };
                    let dhv = dh[[b, k]];
                    let dct = dc[b * h + k] + dhv * o * (1.0 - tc * tc);
                    out[k] = dct * g * i * (1.0 - i);
                    out[h + k] = dct * c_prev * f * (1.0 - f);
                    out[2 * h + k] = dct * i * (1.0 - g * g);
                    out[3 * h + k] = dhv * tc * o * (1.0 - o);
                    dc[b * h + k] = dct * f;
                }
            }
            if step > 0 {
                dh = dz.slice(s![step * batch..(step + 1) * batch, ..]).dot(&self.w_hh);
            }
        }
        grads.b += &dz.sum_axis(Axis(0));
        general_mat_mul(1.0, &dz.t(), &trace.inputs, 1.0, &mut grads.w_ih);
        if steps > 1 {
            general_mat_mul(
                1.0,
                &dz.slice(s![batch.., ..]).t(),
                &trace.hidden.slice(s![..(steps - 1) * batch, ..]),
                1.0,
                &mut grads.w_hh,
            );
        }
    }
}
