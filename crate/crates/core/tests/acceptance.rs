//! Acceptance suite. Runs every criterion, prints one PASS / FAIL / SKIP
//! line each, and exits non-zero if any criterion fails.
//!
//! Criterion 9 reads the Deezer friendship files from `$NSUM_DEEZER_DIR`
//! (`HR_edges.csv`, `HR_genres.json`, ...) and is skipped when they are absent.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use nsum::bounds::{
    adversarial_lower_bound, chernoff_lower, f_bound, mor_bound, sample_size, BoundFamily, DeltaPolicy, MuMode,
};
use nsum::degree::DegreeDistribution;
use nsum::estimators::{estimate_fs_bidirectional, estimate_mor, estimate_ros, extract_ard, Sample};
use nsum::graphgen::{
    build_adversarial_pair, build_clique_pendant, build_star_instance, generate, GeneratorConfig, HiddenSpec,
    StarVariant,
};
use nsum::ingest::{load_edges, DatasetFiles};
use nsum::oracle::{default_corpus, run_corpus};
use nsum::simulate::{mean_error, run_experiment, tail_estimate, ExperimentConfig, Topology, TrialResults};
use nsum::{Instance, Method};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, failures: &mut Vec<String>, msg: impl FnOnce() -> String) {
    if !ok {
        failures.push(msg());
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Verdict {
    if failures.is_empty() {
        Verdict::Pass(summary)
    } else {
        Verdict::Fail(failures.join("; "))
    }
}

fn within(got: u64, mark: f64) -> bool {
    (got as f64 - mark).abs() <= 1e-3 * mark
}

fn sample_size_reproduction() -> Verdict {
    let mut f = Vec::new();
    let cases = [
        (1_000_000u64, 0.05, 1.05, &[131_907.0, 131_934.0][..]),
        (1_000_000, 0.02, 1.05, &[329_768.0][..]),
        (1_000_000, 0.10, 1.05, &[65_953.0][..]),
        (47_538, 0.1101, 1.10, &[12_943.0][..]),
    ];
    let mut got = Vec::new();
    for (n, rho, beta, marks) in cases {
        let m = sample_size(n, rho, beta, 0.5).unwrap();
        got.push(m);
        for &mark in marks {
            check(within(m, mark), &mut f, || format!("sample_size({n}, {rho}, {beta}) = {m}, mark {mark}"));
        }
    }
    let first = got[0];
    check((131_803..=132_066).contains(&first), &mut f, || format!("{first} outside [131803, 132066]"));
    verdict(f, format!("sizes {got:?}"))
}

fn ard_multiset(inst: &Instance) -> Vec<(u32, u32)> {
    let mut v = extract_ard(inst, &Sample::full(inst.n())).unwrap().sorted_pairs();
    v.sort_unstable();
    v
}

fn full_estimates(inst: &Instance) -> (f64, f64) {
    let ard = extract_ard(inst, &Sample::full(inst.n())).unwrap();
    (estimate_mor(&ard).unwrap().value, estimate_ros(&ard).unwrap().value)
}

fn adversarial_construction() -> Verdict {
    let mut f = Vec::new();
    for k in 1..=64usize {
        let (i1, i2) = build_adversarial_pair(k).unwrap();
        check(ard_multiset(&i1) == ard_multiset(&i2), &mut f, || format!("k={k}: ARD multisets differ"));
        let floor = adversarial_lower_bound(2 * k as u64 + 1).unwrap();
        check((floor - (k as f64).sqrt()).abs() < 1e-12, &mut f, || format!("k={k}: floor {floor}"));
        for (name, pick) in [("MoR", 0), ("RoS", 1)] {
            let est = |inst: &Instance| {
                let (m, r) = full_estimates(inst);
                if pick == 0 { m } else { r }
            };
            let (e1, e2) = (est(&i1), est(&i2));
            check(e1 == e2, &mut f, || format!("k={k}: {name} differs between instances"));
            let worse = i1
                .prevalence()
                .errors(e1)
                .unwrap()
                .combined
                .max(i2.prevalence().errors(e2).unwrap().combined);
            check(worse >= (k as f64).sqrt() - 1e-12, &mut f, || {
                format!("k={k}: {name} worse-instance error {worse} < sqrt(k)")
            });
        }
    }
    let (i1, i2) = build_adversarial_pair(4).unwrap();
    for inst in [&i1, &i2] {
        let (mor, ros) = full_estimates(inst);
        check((mor - 4.0 / 45.0).abs() < 1e-15, &mut f, || format!("k=4 MoR {mor}"));
        check((ros - 1.0 / 7.0).abs() < 1e-15, &mut f, || format!("k=4 RoS {ros}"));
    }
    verdict(f, "k = 1..64 indistinguishable; k=4 MoR 4/45, RoS 1/7".into())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

fn star_and_clique() -> Verdict {
    let mut f = Vec::new();
    for n in [10usize, 100] {
        let hub = build_star_instance(n, StarVariant::HubHidden).unwrap();
        let (mor, ros) = full_estimates(&hub);
        let p = hub.prevalence();
        let (em, er) = (p.errors(mor).unwrap().upper, p.errors(ros).unwrap().upper);
        check(close(em, (n - 1) as f64), &mut f, || format!("star {n}: E+ MoR {em}"));
        check(close(er, n as f64 / 2.0), &mut f, || format!("star {n}: E+ RoS {er}"));

        let leaves = build_star_instance(n, StarVariant::LeavesHidden).unwrap();
        let (mor, _) = full_estimates(&leaves);
        let el = leaves.prevalence().errors(mor).unwrap().lower;
        check(close(el, (n - 1) as f64), &mut f, || format!("star {n}: E- MoR {el}"));
    }
    for n in [8usize, 100] {
        let inst = build_clique_pendant(n).unwrap();
        let (_, ros) = full_estimates(&inst);
        let el = inst.prevalence().errors(ros).unwrap().lower;
        check(close(el, (n + 2) as f64 / 4.0), &mut f, || format!("clique-pendant {n}: E- RoS {el}"));
    }
    verdict(f, "star n in {10, 100}, clique-pendant n in {8, 100}".into())
}

fn identity_oracle() -> Verdict {
    let corpus = default_corpus();
    let rows = run_corpus(&corpus).unwrap();
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} {} {} vs {}", r.model, r.check, r.observed, r.reference))
        .collect();
    let applicable = rows.iter().filter(|r| !r.note.starts_with("not applicable")).count();
    verdict(failed, format!("{} models, {applicable} exact checks", corpus.len()))
}

fn desk_config(topology: Topology, rho: f64, bounds: Vec<BoundFamily>, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(topology, rho, vec![100, 1_000, 10_000, 50_000]);
    c.instances = 50;
    c.samples_per_instance = 100;
    c.epsilons = vec![0.05];
    c.bounds = bounds;
    c.delta = DeltaPolicy::Minimize;
    c.master_seed = seed;
    c
}

/// Empirical tail of `method` against `family` at every grid point.
fn tails_below_bound(results: &TrialResults, method: Method, family: BoundFamily, f: &mut Vec<String>) -> Vec<String> {
    let ctx = results.bound_context();
    let mut seen = Vec::new();
    for point in &results.grid {
        let m = point.sample_size;
        let tail = tail_estimate(&results.errors(m, method), 1.05);
        let bound = ctx.evaluate(family, m, 1.05, point.rs_pmf.as_ref()).unwrap().clamped;
        seen.push(format!("{m}:{:.3}<={:.3}", tail.p, bound));
        check(tail.p <= bound + 3.0 * tail.se, f, || {
            format!("{family} rho={} |S|={m}: tail {} > bound {bound} + 3 SE ({})", ctx.rho, tail.p, tail.se)
        });
    }
    seen
}

fn er_bound_validity() -> Verdict {
    let config = desk_config(
        Topology::ErdosRenyi { mean_degree: 30.0 },
        0.05,
        vec![BoundFamily::Mor, BoundFamily::RosPmf, BoundFamily::ErRos],
        501,
    );
    let results = run_experiment(&config).unwrap();
    let mut f = Vec::new();
    let mor = tails_below_bound(&results, Method::MoR, BoundFamily::Mor, &mut f);
    let pmf = tails_below_bound(&results, Method::RoS, BoundFamily::RosPmf, &mut f);
    let er = tails_below_bound(&results, Method::RoS, BoundFamily::ErRos, &mut f);
    verdict(f, format!("MoR [{}] RoS/pmf [{}] RoS/ER [{}]", mor.join(" "), pmf.join(" "), er.join(" ")))
}

fn sf_bound_validity() -> Verdict {
    let mut f = Vec::new();
    let mut summary = Vec::new();
    for (i, rho) in [0.02, 0.05, 0.10].into_iter().enumerate() {
        let mut config = desk_config(Topology::ScaleFree { gamma: 2.5 }, rho, vec![BoundFamily::SfRos], 601 + i as u64);
        config.mu_mode = MuMode::IntegralApprox;
        let results = run_experiment(&config).unwrap();
        let seen = tails_below_bound(&results, Method::RoS, BoundFamily::SfRos, &mut f);
        summary.push(format!("rho={rho} [{}]", seen.join(" ")));
        for point in results.grid.iter().filter(|p| p.sample_size >= 1_000) {
            let m = point.sample_size;
            let (mr, sr) = mean_error(&results.errors(m, Method::RoS));
            let (mm, sm) = mean_error(&results.errors(m, Method::MoR));
            let slack = 3.0 * (sr * sr + sm * sm).sqrt();
            check(mr <= mm + slack, &mut f, || format!("rho={rho} |S|={m}: mean E RoS {mr} > MoR {mm} + {slack}"));
        }
    }
    verdict(f, summary.join("; "))
}

fn consistency_round_trip() -> Verdict {
    let mut f = Vec::new();
    let mut count = 0;
    for n in [1_000u64, 100_000, 10_000_000] {
        for rho in [0.01, 0.05, 0.3] {
            for beta in [1.05, 1.5, 3.0] {
                let alpha = 0.5;
                let m = sample_size(n, rho, beta, alpha).unwrap();
                let raw = mor_bound(beta, m, rho).unwrap().raw;
                let target = (n as f64).powf(-alpha);
                check(raw <= target + 1e-12, &mut f, || format!("n={n} rho={rho} beta={beta}: {raw} > {target}"));
                count += 1;
            }
        }
    }
    verdict(f, format!("{count} grid points"))
}

fn chernoff_sanity() -> Verdict {
    let mut f = Vec::new();
    let draws = 100_000usize;
    let binom = Binomial::new(100, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<u64> = (0..draws).map(|_| binom.sample(&mut rng)).collect();
    let (mu, beta, delta) = (30.0, 1.5, 0.2);
    let frac = |pred: &dyn Fn(f64) -> bool| xs.iter().filter(|&&x| pred(x as f64)).count() as f64 / draws as f64;
    let se = |p: f64| (p * (1.0 - p) / draws as f64).sqrt();

    let two_sided = frac(&|x| x < mu / beta || x > beta * mu);
    let bound = f_bound(beta, mu).unwrap();
    check(two_sided <= bound + 3.0 * se(two_sided), &mut f, || format!("two-sided {two_sided} > {bound}"));

    let lower = frac(&|x| x <= (1.0 - delta) * mu);
    let lbound = chernoff_lower(delta, mu).unwrap().raw;
    check(lower <= lbound + 3.0 * se(lower), &mut f, || format!("lower {lower} > {lbound}"));
    verdict(f, format!("two-sided {two_sided:.4} <= {bound:.4}; lower {lower:.4} <= {lbound:.4}"))
}

fn dataset_statistics() -> Verdict {
    let Some(dir) = std::env::var_os("NSUM_DEEZER_DIR").map(PathBuf::from) else {
        return Verdict::Skip("NSUM_DEEZER_DIR not set".into());
    };
    let hr = DatasetFiles::in_dir(&dir, "HR");
    let ro = DatasetFiles::in_dir(&dir, "RO");
    if !hr.edges.is_file() || !ro.edges.is_file() {
        return Verdict::Skip(format!("edge files missing under {}", dir.display()));
    }
    let mut f = Vec::new();
    let mut summary = Vec::new();
    for (name, files, nodes, edges, avg) in [("HR", &hr, 54_573, 498_202, 18.26), ("RO", &ro, 41_773, 125_826, 6.02)] {
        let s = load_edges(&files.edges).unwrap().stats();
        check(s.nodes == nodes && s.edges == edges, &mut f, || format!("{name}: {} nodes {} edges", s.nodes, s.edges));
        check((s.avg_degree - avg).abs() <= 0.01, &mut f, || format!("{name}: avg degree {}", s.avg_degree));
        summary.push(format!("{name} {}/{}/{:.2}", s.nodes, s.edges, s.avg_degree));
    }
    let hu = DatasetFiles::in_dir(&dir, "HU");
    if hu.edges.is_file() {
        let s = load_edges(&hu.edges).unwrap().stats();
        summary.push(format!("HU as loaded {}/{}/{:.2}", s.nodes, s.edges, s.avg_degree));
    }
    verdict(f, summary.join("; "))
}

fn fs_guarantee() -> Verdict {
    let mut f = Vec::new();
    let mut checked = 0;
    let mut worst_ratio: f64 = 0.0;
    let pmfs: [&[(usize, f64)]; 4] = [&[(1, 1.0)], &[(1, 0.5), (3, 0.5)], &[(2, 0.3), (5, 0.7)], &[(1, 0.6), (2, 0.3), (4, 0.1)]];
    let mut check_instance = |inst: &Instance, label: &str, f: &mut Vec<String>| {
        let degrees = inst.in_degrees();
        let (max, min) = (*degrees.iter().max().unwrap() as f64, *degrees.iter().min().unwrap() as f64);
        let guarantee = (max / min).sqrt();
        let est = estimate_fs_bidirectional(inst).unwrap().value;
        let err = inst.prevalence().errors(est).unwrap().combined;
        worst_ratio = worst_ratio.max(err / guarantee);
        check(err <= guarantee + 1e-9, f, || format!("{label}: FS error {err} > {guarantee}"));
        checked += 1;
    };
    for i in 0..200u64 {
        let n = 6 + (i % 15) as usize;
        let pmf: Vec<(usize, f64)> = pmfs[(i % 4) as usize].iter().copied().filter(|&(k, _)| k < n).collect();
        let total: f64 = pmf.iter().map(|p| p.1).sum();
        let pmf: Vec<_> = pmf.into_iter().map(|(k, p)| (k, p / total)).collect();
        let degrees = DegreeDistribution::explicit(n, &pmf).unwrap();
        let h = 1 + (i as usize * 7) % (n - 1);
        let inst = generate(&GeneratorConfig::new(degrees, HiddenSpec::Uniform(h), 1000 + i)).unwrap().symmetrized();
        check_instance(&inst, &format!("corpus #{i}"), &mut f);
    }
    for k in 1..=64 {
        let (i1, i2) = build_adversarial_pair(k).unwrap();
        check_instance(&i1, &format!("adversarial k={k} I1"), &mut f);
        check_instance(&i2, &format!("adversarial k={k} I2"), &mut f);
    }
    for n in [10, 100] {
        for v in [StarVariant::HubHidden, StarVariant::LeavesHidden] {
            check_instance(&build_star_instance(n, v).unwrap(), &format!("star {n}"), &mut f);
        }
    }
    for n in [8, 100] {
        check_instance(&build_clique_pendant(n).unwrap(), &format!("clique-pendant {n}"), &mut f);
    }
    verdict(f, format!("{checked} instances, max error / guarantee = {worst_ratio:.4}"))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 sample-size reproduction", sample_size_reproduction),
        ("2 adversarial construction", adversarial_construction),
        ("3 star / clique-pendant worst cases", star_and_clique),
        ("4 exact identity oracle", identity_oracle),
        ("5 ER bound validity", er_bound_validity),
        ("6 scale-free bound validity", sf_bound_validity),
        ("7 sample-size round trip", consistency_round_trip),
        ("8 Chernoff sanity", chernoff_sanity),
        ("9 dataset statistics", dataset_statistics),
        ("10 FS guarantee", fs_guarantee),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Verdict::Skip(why) => println!("SKIP criterion {name}: {why}"),
            Verdict::Fail(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
