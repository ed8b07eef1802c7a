//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use linmon::checker::check_certificate_dir;
use linmon::connectivity::{check_lambda_connectivity, check_strong_connectivity, verify_strong_path};
use linmon::counts::{gaussian_binomial, gl_order, idempotent_count};
use linmon::deltagraph::{
    build_delta, build_spanning_tree, color_closure, color_closure_with, replay_trace, WorklistOrder,
};
use linmon::enumeration::enumerate_y;
use linmon::matspace::idempotent_of;
use linmon::presentation::{run_pipeline, CertificateChain, RunOptions};
use linmon::squares::SingularSquare;
use linmon::tables::{build_p, build_t_full, DEFAULT_CELL_BUDGET, DEFAULT_MK_SIDE_BUDGET};
use linmon::{make_field, Field, Mat};
use num_bigint::BigUint;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn field(q: u32) -> Field {
    make_field(q, None).unwrap()
}

fn certification(keep: &mut Option<CertificateChain>) -> Outcome {
    let mut notes = Vec::new();
    for (n, r, q, classes, limit) in [
        (4, 1, 2, 1, 1),
        (4, 1, 3, 2, 1),
        (5, 1, 2, 1, 1),
        (7, 2, 2, 6, 300),
    ] {
        let f = field(q);
        let start = Instant::now();
        let run = run_pipeline(n, r, &f, RunOptions::default()).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure!(run.certified, "({n},{r},{q}) not certified: {:?}", run.failed_stage());
        let chain = run.chain.ok_or("no certificate chain")?;
        let order = gl_order(r as u32, q as u64).unwrap();
        ensure!(chain.class_values.len() == classes, "({n},{r},{q}) has {} classes", chain.class_values.len());
        ensure!(BigUint::from(classes) == order, "({n},{r},{q}) group order {order}");
        ensure!(elapsed < Duration::from_secs(limit), "({n},{r},{q}) took {elapsed:?}");

        let dir = tempfile::tempdir().unwrap();
        chain.write(dir.path()).map_err(|e| e.to_string())?;
        let check = check_certificate_dir(dir.path()).map_err(|e| e.to_string())?;
        ensure!(check.passed, "checker rejects ({n},{r},{q}): {:?}", check.failures);
        ensure!(check.classes == classes, "checker counts {} classes", check.classes);
        notes.push(format!("({n},{r},{q}) {classes} classes in {:.1}s", elapsed.as_secs_f64()));
        if (n, r, q) == (7, 2, 2) {
            *keep = Some(chain);
        }
    }
    Ok(notes.join(", "))
}

fn closure() -> Outcome {
    let mut notes = Vec::new();
    for (n, r, q) in [(3, 1, 2), (4, 1, 2), (4, 2, 2), (5, 2, 2), (4, 1, 3), (5, 3, 2)] {
        let start = Instant::now();
        let en = Arc::new(enumerate_y(n, r, &field(q)).unwrap());
        let p = build_p(&en, DEFAULT_CELL_BUDGET).unwrap();
        let delta = build_delta(&p).unwrap();
        let tree = build_spanning_tree(&en, &delta).unwrap();
        let state = color_closure(&delta, &tree);
        let elapsed = start.elapsed();
        ensure!(state.all_blue(&delta), "({n},{r},{q}) stops at {} of {}", state.blue_count(), delta.edge_count());
        ensure!(replay_trace(&p, &tree, &state.trace).is_valid(), "({n},{r},{q}) trace does not replay");
        ensure!(elapsed < Duration::from_secs(30), "({n},{r},{q}) took {elapsed:?}");
        notes.push(format!("({n},{r},{q}) {} edges", delta.edge_count()));
    }
    Ok(notes.join(", "))
}

fn lambda() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for (k, m, q) in [(1, 2, 2), (1, 3, 2), (2, 3, 2), (1, 2, 3)] {
        let rep = check_lambda_connectivity(m, k, &field(q), DEFAULT_MK_SIDE_BUDGET).map_err(|e| e.to_string())?;
        ensure!(rep.passed, "(k,m,q) = ({k},{m},{q}): {:?}", rep.failures);
        for v in &rep.values {
            ensure!(v.components == 1, "({k},{m},{q}) value {} has {} components", v.value, v.components);
        }
        checked += rep.values.len();
    }
    for (k, q) in [(1, 2), (1, 3), (1, 4), (1, 5), (2, 2)] {
        let rep = check_lambda_connectivity(k, k, &field(q), DEFAULT_MK_SIDE_BUDGET).map_err(|e| e.to_string())?;
        ensure!(rep.passed, "(k,m,q) = ({k},{k},{q}): {:?}", rep.failures);
        for v in rep.values.iter().filter(|v| v.rank < k) {
            ensure!(v.components == 1, "singular {} at ({k},{k},{q}) has {} components", v.value, v.components);
        }
        checked += rep.values.len();
    }
    let rep = check_lambda_connectivity(1, 1, &field(3), DEFAULT_MK_SIDE_BUDGET).map_err(|e| e.to_string())?;
    let invertible: Vec<_> = rep.values.iter().filter(|v| v.rank == 1).collect();
    ensure!(invertible.len() == 2, "expected 2 invertible values, got {}", invertible.len());
    for v in invertible {
        ensure!(v.components > 1, "invertible {} at (1,1,3) is connected", v.value);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "sweep took {elapsed:?}");
    Ok(format!("{checked} values, negative control disconnected, {:.1}s", elapsed.as_secs_f64()))
}

fn strong() -> Outcome {
    let mut notes = Vec::new();
    for (n, r, q, per_value) in [(4, 1, 2, usize::MAX), (4, 1, 3, usize::MAX), (7, 2, 2, 1000)] {
        let f = field(q);
        let en = Arc::new(enumerate_y(n, r, &f).unwrap());
        let t = build_t_full(&en, DEFAULT_CELL_BUDGET).unwrap();
        let (rep, comps) = check_strong_connectivity(&t).map_err(|e| e.to_string())?;
        ensure!(rep.passed, "({n},{r},{q}): {:?}", rep.failures);
        let mut paths = 0usize;
        for sc in comps.iter().flatten() {
            ensure!(sc.count == 1, "({n},{r},{q}) value {} splits into {}", t.value(sc.vid).to_text(), sc.count);
            let occ = t.occurrences(sc.vid);
            let stride = (occ.len() / per_value.min(occ.len()).max(1)).max(1);
            let targets: Vec<_> = (1..occ.len()).step_by(stride).map(|i| occ.cells[i]).collect();
            for (to, path) in targets.iter().zip(sc.paths_from(&t, occ.cells[0], &targets)) {
                let path = path.ok_or("no path inside a component")?;
                ensure!(verify_strong_path(&t, &path), "({n},{r},{q}) path to {to:?} rejected");
                ensure!(path.cells.last() == Some(to), "({n},{r},{q}) path ends off target");
                paths += 1;
            }
        }
        for v in &rep.values {
            ensure!(v.edges_verified, "({n},{r},{q}) forest edge rejected for {}", v.value);
        }
        notes.push(format!("({n},{r},{q}) {} values, {paths} paths", rep.values.len()));
    }
    Ok(notes.join(", "))
}

fn counting() -> Outcome {
    let two_pow_10 = BigUint::from(1u32 << 10);
    let idem = gaussian_binomial(7, 5, 2).unwrap() * two_pow_10;
    ensure!(idem == BigUint::from(2_731_008u32), "idempotents {idem}");
    ensure!(idempotent_count(7, 5, 2).unwrap() == idem, "idempotent_count disagrees");
    let gl = gl_order(5, 2).unwrap();
    ensure!(gl == BigUint::from(9_999_360u32), "gl order {gl}");
    ensure!(idem < gl, "inequality fails");
    let mut sizes = 0;
    for (q, max_n) in [(2, 7), (3, 5), (4, 4), (5, 4), (7, 3), (8, 3), (9, 3)] {
        let f = field(q);
        for n in 1..=max_n {
            for r in 1..=n {
                let en = enumerate_y(n, r, &f).unwrap();
                let g = gaussian_binomial(n as u32, r as u32, q as u64).unwrap();
                ensure!(BigUint::from(en.len()) == g, "({n},{r},{q}) enumerates {} but [n r]_q = {g}", en.len());
                sizes += 1;
            }
        }
    }
    Ok(format!("{idem} < {gl}, {sizes} enumeration sizes match"))
}

fn union_find_acyclic(nodes: usize, edges: &[(usize, usize)]) -> (bool, usize) {
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn root(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let mut comps = nodes;
    for &(a, b) in edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra == rb {
            return (false, comps);
        }
        parent[ra] = rb;
        comps -= 1;
    }
    (true, comps)
}

fn write_and_read(chain: &CertificateChain, dir: &Path) -> Vec<Vec<u8>> {
    chain.write(dir).unwrap();
    ["certificate.json", "stage1.trace", "stage2.edges"]
        .iter()
        .map(|name| fs::read(dir.join(name)).unwrap())
        .collect()
}

fn invariants() -> Outcome {
    for (n, r, q) in [(4, 1, 2), (5, 2, 2), (4, 1, 3), (6, 2, 2), (5, 3, 2)] {
        let f = field(q);
        let en = Arc::new(enumerate_y(n, r, &f).unwrap());
        let p = build_p(&en, DEFAULT_CELL_BUDGET).unwrap();
        let delta = build_delta(&p).unwrap();
        let tree = build_spanning_tree(&en, &delta).unwrap();
        let size = en.len();
        ensure!(tree.len() == 2 * size - 1, "({n},{r},{q}) tree has {} edges", tree.len());
        let pairs: Vec<(usize, usize)> =
            tree.edges.iter().map(|t| (t.edge.x as usize, size + t.edge.y as usize)).collect();
        let (acyclic, comps) = union_find_acyclic(2 * size, &pairs);
        ensure!(acyclic && comps == 1, "({n},{r},{q}) tree acyclic {acyclic}, {comps} components");
        let id = Mat::identity(&f, r);
        for t in &tree.edges {
            let prod = en.y_mats()[t.edge.y as usize].matmul(&en.x_mats()[t.edge.x as usize]).unwrap();
            ensure!(prod == id, "({n},{r},{q}) tree edge {:?} multiplies to {}", t.edge, prod.to_text());
        }
    }

    for q in [2u64, 3, 4, 5, 7] {
        for n in 2..=9u32 {
            for r in 1..n {
                let lhs = gaussian_binomial(n, r, q).unwrap();
                let a = gaussian_binomial(n - 1, r - 1, q).unwrap()
                    + BigUint::from(q).pow(r) * gaussian_binomial(n - 1, r, q).unwrap();
                let b = gaussian_binomial(n - 1, r, q).unwrap()
                    + BigUint::from(q).pow(n - r) * gaussian_binomial(n - 1, r - 1, q).unwrap();
                ensure!(lhs == a && lhs == b, "q-Pascal fails at n={n} r={r} q={q}");
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for q in [2u32, 3, 4, 5] {
        let f = field(q);
        for _ in 0..300 {
            let (rows, cols) = (rng.gen_range(1..6), rng.gen_range(1..7));
            let entries: Vec<u8> = (0..rows * cols).map(|_| rng.gen_range(0..q) as u8).collect();
            let m = Mat::new(&f, rows, cols, entries).unwrap();
            let e = m.rre();
            ensure!(e.is_rre() && e.rre() == e, "rre not idempotent for {}", m.to_text());
            ensure!(e.row_space_equal(&m) && e.rank() == m.rank(), "rre changes the row space of {}", m.to_text());
        }
    }

    for (n, r, q) in [(4, 2, 2), (4, 1, 3), (5, 2, 3)] {
        let f = field(q);
        let en = enumerate_y(n, r, &f).unwrap();
        let mut checked = 0;
        while checked < 400 {
            let y = &en.y_mats()[rng.gen_range(0..en.len())];
            let x = &en.x_mats()[rng.gen_range(0..en.len())];
            if y.matmul(x).unwrap().rank() < r {
                ensure!(idempotent_of(x, y).is_err(), "idempotent_of accepts singular YX");
                continue;
            }
            let e = idempotent_of(x, y).unwrap();
            ensure!(e.matmul(&e).unwrap() == e, "E^2 != E");
            ensure!(e.rank() == r, "rank E = {}", e.rank());
            ensure!(e.row_space_equal(y) && e.col_space_equal(x), "E is not in the R-class of X and L-class of Y");
            ensure!(e.matmul(x).unwrap() == *x && y.matmul(&e).unwrap() == *y, "E does not fix X and Y");
            checked += 1;
        }
    }

    for (n, r, q) in [(3, 1, 2), (4, 2, 2), (5, 2, 2), (4, 1, 3), (5, 3, 2)] {
        let en = Arc::new(enumerate_y(n, r, &field(q)).unwrap());
        let p = build_p(&en, DEFAULT_CELL_BUDGET).unwrap();
        let delta = build_delta(&p).unwrap();
        let tree = build_spanning_tree(&en, &delta).unwrap();
        let fifo = color_closure_with(&delta, &tree, WorklistOrder::Fifo);
        let lifo = color_closure_with(&delta, &tree, WorklistOrder::Lifo);
        ensure!(fifo.blue_bits() == lifo.blue_bits(), "({n},{r},{q}) blue sets depend on order");
    }

    for (n, r, q) in [(4, 1, 3), (5, 1, 2)] {
        let f = field(q);
        let runs: Vec<Vec<Vec<u8>>> = (0..2)
            .map(|_| {
                let run = run_pipeline(n, r, &f, RunOptions::default()).unwrap();
                let dir = tempfile::tempdir().unwrap();
                write_and_read(run.chain.as_ref().unwrap(), dir.path())
            })
            .collect();
        ensure!(runs[0] == runs[1], "({n},{r},{q}) certificate differs between runs");
    }
    Ok("tree, q-Pascal, rre, idempotent_of, closure order, certificate bytes".into())
}

/// Arithmetic mod a prime, kept apart from the library's field tables.
struct Naive {
    p: i64,
}

impl Naive {
    fn reduce(&self, a: i64) -> i64 {
        a.rem_euclid(self.p)
    }

    fn inv(&self, a: i64) -> i64 {
        (1..self.p).find(|b| self.reduce(a * b) == 1).expect("unit")
    }

    fn mul(&self, a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
        (0..a.len())
            .map(|i| {
                (0..b[0].len())
                    .map(|j| self.reduce((0..b.len()).map(|k| a[i][k] * b[k][j]).sum()))
                    .collect()
            })
            .collect()
    }

    fn inverse(&self, m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
        let n = m.len();
        let mut a: Vec<Vec<i64>> = m
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| (i == j) as i64));
                r
            })
            .collect();
        for c in 0..n {
            let piv = (c..n).find(|&i| a[i][c] != 0)?;
            a.swap(c, piv);
            let s = self.inv(a[c][c]);
            for v in a[c].iter_mut() {
                *v = self.reduce(*v * s);
            }
            let pivot = a[c].clone();
            for (i, row) in a.iter_mut().enumerate() {
                if i != c && row[c] != 0 {
                    let factor = row[c];
                    for (v, p) in row.iter_mut().zip(&pivot) {
                        *v = self.reduce(*v - factor * p);
                    }
                }
            }
        }
        Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
    }
}

fn raw(m: &Mat) -> Vec<Vec<i64>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|&v| v as i64).collect()).collect()
}

fn soundness(chain: Option<&CertificateChain>) -> Outcome {
    let chain = chain.ok_or("no (7,2,2) certificate from the certification run")?;
    let f = field(2);
    let en = enumerate_y(7, 2, &f).unwrap();
    let ys: Vec<Vec<Vec<i64>>> = en.y_mats().iter().map(raw).collect();
    let xs: Vec<Vec<Vec<i64>>> = en.x_mats().iter().map(raw).collect();
    let z = Naive { p: 2 };
    let total = chain.cited_square_count();
    ensure!(total > 0, "certificate cites no squares");
    let mut rng = ChaCha8Rng::seed_from_u64(20_000);
    for _ in 0..10_000 {
        let i = rng.gen_range(0..total);
        let SingularSquare { x, x2, y, y2 } = chain.cited_square(i).ok_or("index out of range")?;
        let (x, x2, y, y2) = (x as usize, x2 as usize, y as usize, y2 as usize);
        let a = z.mul(&ys[y], &xs[x]);
        let b = z.mul(&ys[y2], &xs[x]);
        let c = z.mul(&ys[y], &xs[x2]);
        let d = z.mul(&ys[y2], &xs[x2]);
        let (Some(bi), Some(di)) = (z.inverse(&b), z.inverse(&d)) else {
            return Err(format!("square {i} has a singular corner"));
        };
        ensure!(z.inverse(&a).is_some() && z.inverse(&c).is_some(), "square {i} has a singular corner");
        ensure!(z.mul(&a, &bi) == z.mul(&c, &di), "square {i} fails the criterion");
    }
    Ok(format!("10000 of {total} cited squares re-evaluated"))
}

fn report(index: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {index} {name} ({secs:.1}s): {detail}");
            true
        }
        Err(why) => {
            println!("FAIL {index} {name} ({secs:.1}s): {why}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut chain = None;
    let results = [
        report(1, "certification", || certification(&mut chain)),
        report(2, "closure", closure),
        report(3, "lambda connectivity", lambda),
        report(4, "strong connectivity", strong),
        report(5, "counting", counting),
        report(6, "structural invariants", invariants),
        report(7, "sampled soundness", || soundness(chain.as_ref())),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
