//! Reference PLS1 on plain vectors: iterative NIPALS (inner loop run to
//! convergence) with prediction by sequential deflation of the query.

pub struct OracleModel {
    x_mean: Vec<f64>,
    y_mean: f64,
    w: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    q: Vec<f64>,
    pub t: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fit(x: &[Vec<f64>], y: &[f64], a: usize) -> OracleModel {
    let n = x.len();
    let d = x[0].len();
    let x_mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut e: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&x_mean).map(|(v, m)| v - m).collect()).collect();
    let mut f: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut model = OracleModel {
        x_mean,
        y_mean,
        w: vec![],
        p: vec![],
        q: vec![],
        t: vec![],
    };
    for _ in 0..a {
        let mut u = f.clone();
        let mut t_prev: Option<Vec<f64>> = None;
        let mut iterations = 0;
        let (w, t) = loop {
            iterations += 1;
            let uu = dot(&u, &u);
            let mut w: Vec<f64> = (0..d).map(|j| e.iter().zip(&u).map(|(r, ui)| r[j] * ui).sum::<f64>() / uu).collect();
            let norm = dot(&w, &w).sqrt();
            w.iter_mut().for_each(|v| *v /= norm);
            let t: Vec<f64> = e.iter().map(|r| dot(r, &w)).collect();
            let c = dot(&f, &t) / dot(&t, &t);
            u = f.iter().map(|v| v / c).collect();
            if let Some(prev) = &t_prev {
                let diff: f64 = prev.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if diff <= 1e-12 * dot(&t, &t).sqrt().max(1.0) || iterations >= 100 {
                    break (w, t);
                }
            }
            t_prev = Some(t);
        };
        let tt = dot(&t, &t);
        let p: Vec<f64> = (0..d).map(|j| e.iter().zip(&t).map(|(r, ti)| r[j] * ti).sum::<f64>() / tt).collect();
        let q = dot(&f, &t) / tt;
        for (row, ti) in e.iter_mut().zip(&t) {
            for (v, pj) in row.iter_mut().zip(&p) {
                *v -= ti * pj;
            }
        }
        for (v, ti) in f.iter_mut().zip(&t) {
            *v -= q * ti;
        }
        model.w.push(w);
        model.p.push(p);
        model.q.push(q);
        model.t.push(t);
    }
    model
}

impl OracleModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut e: Vec<f64> = x.iter().zip(&self.x_mean).map(|(v, m)| v - m).collect();
        let mut y = self.y_mean;
        for ((w, p), q) in self.w.iter().zip(&self.p).zip(&self.q) {
            let t = dot(&e, w);
            y += q * t;
            for (v, pj) in e.iter_mut().zip(p) {
                *v -= t * pj;
            }
        }
        y
    }
}
