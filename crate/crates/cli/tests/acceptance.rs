//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Reference values are recomputed here by brute-force oracles that share no
//! code with the library.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ramhack::agents::{prepare, AgentKind};
use ramhack::eval::{derive_streams, draw_noop_count, harness_rng, run_episode, EvalProtocol};
use ramhack::games::{builtin_variant, crossing, game, paddleball};
use ramhack::metrics::{bootstrap_ci, hns, human_aggregate, iqm, performance_change, BootstrapConfig, ReferenceScores};
use ramhack::patch::attach;
use ramhack::{Action, Env, Machine, MachineConfig, PatchedMachine, FRAME_HEIGHT, FRAME_WIDTH};
use ramhack_cli::{demo_config, run};
use ramhack_play::rle::decode_frame;
use ramhack_play::study::session_log_path;
use ramhack_play::{aggregate_study, read_session_log, serve, Phase, ServerConfig, ServerMsg, SessionConfig, Study};
use tokio_tungstenite::tungstenite::Message;

type Verdict = Result<String, String>;

type Criterion = (&'static str, &'static str, fn() -> Verdict);

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ---- oracles ----

/// Removes the current minimum and maximum `n/4` times, then averages.
fn oracle_iqm(values: &[f64]) -> f64 {
    let mut rest = values.to_vec();
    for _ in 0..values.len() / 4 {
        let lo = (0..rest.len()).fold(0, |b, i| if rest[i] < rest[b] { i } else { b });
        rest.swap_remove(lo);
        let hi = (0..rest.len()).fold(0, |b, i| if rest[i] > rest[b] { i } else { b });
        rest.swap_remove(hi);
    }
    let mut total = 0.0;
    for v in &rest {
        total += v;
    }
    total / rest.len() as f64
}

fn oracle_hns(a: f64, r: f64, h: f64) -> f64 {
    if h > r {
        (a - r) / (h - r)
    } else {
        (a - r) / (r - h)
    }
}

fn oracle_pc(mm: f64, rm: f64, mo: f64, ro: f64) -> f64 {
    let d = mo - ro;
    (mm - rm) / d.abs() - d.signum()
}

fn scaled(rng: &mut ChaCha8Rng) -> f64 {
    let mag = 10f64.powi(rng.gen_range(-1..4));
    rng.gen_range(-mag..mag)
}

fn metric_oracles() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst = [0f64; 4];
    for _ in 0..1000 {
        let (a, r) = (scaled(&mut rng), scaled(&mut rng));
        let h = r + rng.gen_range(0.5..500.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        worst[0] = worst[0].max((hns(a, r, h).unwrap() - oracle_hns(a, r, h)).abs());

        let (mm, rm, ro) = (scaled(&mut rng), scaled(&mut rng), scaled(&mut rng));
        let mo = ro + rng.gen_range(0.5..500.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        worst[1] = worst[1].max((performance_change(mm, rm, mo, ro).unwrap() - oracle_pc(mm, rm, mo, ro)).abs());

        let n = rng.gen_range(1..200);
        let xs: Vec<f64> = (0..n).map(|_| scaled(&mut rng)).collect();
        worst[2] = worst[2].max((iqm(&xs).unwrap() - oracle_iqm(&xs)).abs());

        let mut people = BTreeMap::new();
        for p in 0..rng.gen_range(1..12) {
            let k = rng.gen_range(1..40);
            people.insert(format!("p{p}"), (0..k).map(|_| scaled(&mut rng)).collect::<Vec<f64>>());
        }
        let expect = people.values().map(|v| oracle_iqm(v)).sum::<f64>() / people.len() as f64;
        worst[3] = worst[3].max((human_aggregate(&people).unwrap() - expect).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst.iter().all(|&w| w <= 1e-9) && within(elapsed, 10.0),
        format!(
            "max |delta| hns {:.1e}, pc {:.1e}, iqm {:.1e}, human_aggregate {:.1e}; {:.2}s",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            elapsed.as_secs_f64()
        ),
    )
}

fn reference_arithmetic() -> Verdict {
    let h = hns(19.0, -20.7, 14.6).unwrap();
    let pc = performance_change(-15.0, -20.62, 19.0, -20.62).unwrap();
    check(
        (h - 1.1246).abs() <= 1e-3 && (pc - -0.858).abs() <= 1e-3,
        format!("hns {h:.4} (want 1.1246), pc {pc:.4} (want -0.858)"),
    )
}

// ---- mechanism ----

fn shortcut_demo() -> Verdict {
    let start = Instant::now();
    let config = demo_config(0);
    let result = ramhack::eval::run_matrix(&config.cells, &config.protocol, 0).unwrap();
    let scores = |variant: &str, agent: &str| -> Vec<f64> {
        result
            .samples
            .iter()
            .filter(|s| s.variant == variant && s.agent == agent)
            .map(|s| s.score as f64)
            .collect()
    };
    let q = |v: &str, a: &str| oracle_iqm(&scores(v, a));
    let (ro, rm) = (q("original", "random"), q("lazy_enemy", "random"));
    let pc_enemy = oracle_pc(q("lazy_enemy", "enemy_tracker"), rm, q("original", "enemy_tracker"), ro);
    let pc_ball = oracle_pc(q("lazy_enemy", "ball_tracker"), rm, q("original", "ball_tracker"), ro);
    let elapsed = start.elapsed();
    let p = &config.protocol;
    check(
        p.n_episodes == 30
            && p.seeds.len() == 3
            && scores("original", "random").len() == 90
            && result.invalid.is_empty()
            && pc_enemy <= -0.5
            && pc_ball >= -0.1
            && within(elapsed, 60.0),
        format!(
            "enemy_tracker PC {pc_enemy:+.3} (<= -0.5), ball_tracker PC {pc_ball:+.3} (>= -0.1); {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn patched(game_id: &str, variant: &str, seed: u64) -> PatchedMachine {
    let m = Machine::create(&MachineConfig::new(game_id, seed)).unwrap();
    attach(m, builtin_variant(game_id, variant).unwrap(), seed).unwrap()
}

fn visual_invariance() -> Verdict {
    let start = Instant::now();
    let g = game("bricks").unwrap();
    let p = EvalProtocol::default();
    let mut compared = 0usize;
    let mut mismatches = Vec::new();
    for kind in [AgentKind::Random, AgentKind::Noop, AgentKind::TabularQ] {
        let f = prepare(&kind, g).unwrap();
        for seed in 0..3u64 {
            for ep in 0..10 {
                let s = derive_streams(seed, "bricks", "original", &kind.id(), ep);
                let mut orig = Machine::create(&MachineConfig::new("bricks", s.machine)).unwrap();
                let mut red = patched("bricks", "color_player_and_ball_red", s.machine);
                let a = run_episode(&mut orig, f.build(s.agent).as_mut(), &p, s.harness, true).unwrap();
                let b = run_episode(&mut red, f.build(s.agent).as_mut(), &p, s.harness, true).unwrap();
                compared += a.chosen.len();
                if a.chosen != b.chosen || a.executed != b.executed {
                    mismatches.push(format!("{kind}/{seed}/{ep}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches.is_empty() && within(elapsed, 30.0),
        format!(
            "random, noop, tabular_q: {compared} decisions compared, {} mismatched episodes; {:.2}s",
            mismatches.len(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Tiny LCG so action choice is independent of the crate's generators.
fn lcg_pick(state: &mut u64, legal: &[Action]) -> Action {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    legal[(*state >> 33) as usize % legal.len()]
}

fn patch_semantics() -> Verdict {
    let moves = [Action::Noop, Action::Up, Action::Down];
    let (mut held, mut lazy_violations) = (0u64, 0u64);
    for seed in 0..10 {
        let mut m = patched("paddleball", "lazy_enemy", seed);
        let mut s = seed;
        let mut prev_cond = false;
        while !m.is_terminated() {
            let before = m.ram().read(paddleball::ENEMY_Y);
            m.advance(lcg_pick(&mut s, &moves)).unwrap();
            let ram = m.ram();
            let cond = ram.read_signed(paddleball::BALL_DX) > 0;
            if cond && prev_cond {
                held += 1;
                lazy_violations += (ram.read(paddleball::ENEMY_Y) != before) as u64;
            }
            prev_cond = cond;
        }
    }
    let (mut car_ticks, mut car_violations) = (0u64, 0u64);
    for seed in 0..10 {
        let mut m = patched("crossing", "stop_all_cars", seed);
        let cars = |m: &PatchedMachine| (0..crossing::LANES as u8).map(|l| m.ram().read(crossing::CAR_X + l)).collect::<Vec<u8>>();
        let start = cars(&m);
        let mut s = seed + 100;
        while !m.is_terminated() {
            m.advance(lcg_pick(&mut s, &moves)).unwrap();
            car_ticks += 1;
            car_violations += (cars(&m) != start) as u64;
        }
    }
    check(
        lazy_violations == 0 && car_violations == 0 && held > 0 && car_ticks > 0,
        format!(
            "lazy_enemy {lazy_violations} violations in {held} held ticks; stop_all_cars {car_violations} violations in {car_ticks} ticks"
        ),
    )
}

fn protocol_statistics() -> Verdict {
    let p = EvalProtocol::default();
    let g = game("crossing").unwrap();
    let random = prepare(&AgentKind::Random, g).unwrap();
    let (mut forced, mut decisions, mut seed) = (0u64, 0u64, 0u64);
    while decisions < 100_000 {
        let s = derive_streams(seed, "crossing", "original", "random", 0);
        let mut env = Machine::create(&MachineConfig::new("crossing", s.machine)).unwrap();
        let t = run_episode(&mut env, random.build(s.agent).as_mut(), &p, s.harness, false).unwrap();
        forced += t.sticky_forced as u64;
        decisions += t.steps as u64;
        seed += 1;
    }
    let rate = forced as f64 / decisions as f64;

    let n = 30_000u32;
    let mut bins = [0u32; 31];
    for e in 0..n {
        let s = derive_streams(e as u64 / 1000, "paddleball", "original", "random", e % 1000);
        bins[draw_noop_count(&mut harness_rng(s.harness), 30) as usize] += 1;
    }
    let worst = bins
        .iter()
        .map(|&c| (c as f64 / n as f64 - 1.0 / 31.0).abs())
        .fold(0.0, f64::max);
    check(
        (rate - 0.25).abs() <= 0.01 && worst <= 0.02,
        format!(
            "sticky rate {rate:.4} over {decisions} decisions; noop bins max |freq - 1/31| {worst:.4} over {n} draws"
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let eval = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = run(["ramhack", "eval", "--out", out_dir.to_str().unwrap()], None);
        assert_eq!(out.code, 0, "{}", out.stderr);
        std::fs::read(out_dir.join("samples.csv")).unwrap()
    };
    let (a, b) = (eval("a"), eval("b"));

    let mut replays_equal = true;
    for (g, variant) in [("paddleball", Some("lazy_enemy")), ("crossing", Some("stop_random_car")), ("bricks", None)] {
        let mut env: Box<dyn Env> = match variant {
            Some(v) => Box::new(patched(g, v, 31)),
            None => Box::new(Machine::create(&MachineConfig::new(g, 31)).unwrap()),
        };
        let legal = env.game().legal_actions();
        let mut s = 5u64;
        for _ in 0..200 {
            env.advance(lcg_pick(&mut s, legal)).unwrap();
        }
        let snap = env.snapshot();
        let plan: Vec<Action> = (0..500).map(|_| lcg_pick(&mut s, legal)).collect();
        let play = |env: &mut Box<dyn Env>| {
            let mut trace = Vec::new();
            for &a in &plan {
                if env.is_terminated() {
                    break;
                }
                let out = env.step(a).unwrap();
                trace.push((out.ram_after, out.reward, out.frame.pixels().to_vec()));
            }
            trace
        };
        let first = play(&mut env);
        env.restore(&snap);
        replays_equal &= play(&mut env) == first;
    }
    check(
        a == b && !a.is_empty() && replays_equal,
        format!(
            "samples.csv {} bytes, identical: {}; snapshot replays identical: {replays_equal}",
            a.len(),
            a == b
        ),
    )
}

fn bootstrap_behavior() -> Verdict {
    let start = Instant::now();
    let cfg = BootstrapConfig::default();
    let constant = vec![7.5; 90];
    let strata: Vec<u64> = (0..90).map(|i| i / 30).collect();
    let c = bootstrap_ci(&constant, Some(&strata), &cfg).unwrap();
    let collapses = c.lo == 7.5 && c.hi == 7.5 && c.point == 7.5;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(5.0, 2.0).unwrap();
    let sample: Vec<f64> = (0..90).map(|_| normal.sample(&mut rng)).collect();
    let deterministic = bootstrap_ci(&sample, Some(&strata), &cfg).unwrap() == bootstrap_ci(&sample, Some(&strata), &cfg).unwrap();

    // Symmetric population, so the true IQM is the mean.
    let trials = 500;
    let mut hits = 0;
    for trial in 0..trials {
        let values: Vec<f64> = (0..90).map(|_| normal.sample(&mut rng)).collect();
        let ci = bootstrap_ci(&values, Some(&strata), &BootstrapConfig { seed: trial, ..cfg }).unwrap();
        hits += (ci.lo <= 5.0 && 5.0 <= ci.hi) as u32;
    }
    let coverage = hits as f64 / trials as f64;
    let elapsed = start.elapsed();
    check(
        collapses && deterministic && coverage >= 0.93 && within(elapsed, 60.0),
        format!(
            "constant CI [{}, {}], deterministic {deterministic}, coverage {coverage:.3} over {trials} trials at 95%; {:.2}s",
            c.lo,
            c.hi,
            elapsed.as_secs_f64()
        ),
    )
}

// ---- play service ----

/// Enemy paddle center and ball center column, read back from pixels.
fn read_frame(pixels: &[u8]) -> (Option<i32>, Option<i32>) {
    let at = |x: i32, y: i32| pixels[y as usize * FRAME_WIDTH + x as usize];
    let bg = paddleball::BACKGROUND;
    let field = paddleball::FIELD_TOP..paddleball::FIELD_BOTTOM;
    let enemy = field
        .clone()
        .find(|&y| at(paddleball::ENEMY_X + 1, y) != bg)
        .map(|top| top + paddleball::PADDLE_HALF);
    let ball = (paddleball::ENEMY_X + paddleball::PADDLE_WIDTH..paddleball::PLAYER_X)
        .find(|&x| field.clone().any(|y| at(x, y) != bg))
        .map(|left| left + paddleball::BALL_HALF_W);
    (enemy, ball)
}

async fn play_session(base: String, token: &'static str, keys: &'static str) -> Result<(usize, usize, usize), String> {
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("{base}{token}")).await.map_err(|e| e.to_string())?;
    ws.send(Message::Text(keys.to_string().into())).await.map_err(|e| e.to_string())?;
    let mut frames: Vec<(Phase, Option<i32>, Option<i32>)> = Vec::new();
    let mut ended = false;
    while let Some(msg) = tokio::time::timeout(Duration::from_secs(20), ws.next()).await.map_err(|_| "timeout")? {
        let Ok(Message::Text(text)) = msg else { continue };
        match serde_json::from_str::<ServerMsg>(&text).map_err(|e| e.to_string())? {
            ServerMsg::Frame { rle, phase, .. } => {
                let pixels = decode_frame(&rle, FRAME_WIDTH, FRAME_HEIGHT).map_err(|e| e.to_string())?;
                let (e, b) = read_frame(&pixels);
                frames.push((phase, e, b));
            }
            ServerMsg::End => {
                ended = true;
                break;
            }
            ServerMsg::Error { msg } => return Err(msg),
            ServerMsg::Phase { .. } => {}
        }
    }
    if !ended {
        return Err(format!("{token}: no end message"));
    }
    // Frames where the ball kept moving toward the player across two ticks,
    // well clear of the paddles.
    let (mut eval1_moves, mut eval2_moves, mut eval2_checked) = (0, 0, 0);
    for w in frames.windows(3) {
        let [(p0, e0, b0), (p1, e1, b1), (p2, _, b2)] = w else { unreachable!() };
        if p0 != p1 || p1 != p2 {
            continue;
        }
        let (Some(e0), Some(e1), Some(b0), Some(b1), Some(b2)) = (*e0, *e1, *b0, *b1, *b2) else { continue };
        if b1 - b0 != 2 || b2 - b1 != 2 || !(30..130).contains(&b1) {
            continue;
        }
        match p1 {
            Phase::Eval1 => eval1_moves += (e1 != e0) as usize,
            Phase::Eval2 => {
                eval2_checked += 1;
                eval2_moves += (e1 != e0) as usize;
            }
            Phase::Train => {}
        }
    }
    Ok((eval1_moves, eval2_moves, eval2_checked))
}

fn end_to_end_session() -> Verdict {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let study = Study::parse("token,game,variant\nalpha,paddleball,lazy_enemy\nbeta,paddleball,lazy_enemy\n").unwrap();
    let start = Instant::now();
    let sessions = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("ws://{}/session/", listener.local_addr().unwrap());
        let config = ServerConfig {
            log_dir: dir.path().to_path_buf(),
            session: SessionConfig::uniform(Duration::from_secs(10)),
        };
        tokio::spawn(serve(listener, study.clone(), config));
        tokio::join!(
            play_session(base.clone(), "alpha", r#"{"type":"keys","held":["UP"]}"#),
            play_session(base, "beta", r#"{"type":"keys","held":["DOWN"]}"#)
        )
    });
    let elapsed = start.elapsed();
    let (a, b) = match sessions {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };

    let mut ordered = true;
    let mut per_phase = [BTreeMap::new(), BTreeMap::new()];
    for token in ["alpha", "beta"] {
        let rows = read_session_log(&session_log_path(dir.path(), token)).map_err(|e| e.to_string())?;
        ordered &= rows.windows(2).all(|w| w[0].phase as u8 <= w[1].phase as u8);
        ordered &= rows.first().map(|r| r.phase) == Some(Phase::Train) && rows.last().map(|r| r.phase) == Some(Phase::Eval2);
        for (i, phase) in [Phase::Eval1, Phase::Eval2].into_iter().enumerate() {
            per_phase[i].insert(token, rows.iter().filter(|r| r.phase == phase).map(|r| r.score as f64).collect::<Vec<_>>());
        }
    }
    let hand = |m: &BTreeMap<&str, Vec<f64>>| m.values().map(|v| oracle_iqm(v)).sum::<f64>() / m.len() as f64;
    let report = aggregate_study(dir.path(), &study, &ReferenceScores::new()).map_err(|e| e.to_string())?;
    let cell = report.cells.first().ok_or("no study cell")?;
    let agg_ok = report.cells.len() == 1
        && cell.participants == 2
        && (cell.eval1 - hand(&per_phase[0])).abs() <= 1e-9
        && (cell.eval2 - hand(&per_phase[1])).abs() <= 1e-9;
    let patched_only_in_eval2 = a.1 + b.1 == 0 && a.2 + b.2 > 0 && a.0 + b.0 > 0;
    check(
        ordered && agg_ok && patched_only_in_eval2,
        format!(
            "phase order {ordered}; enemy moved on {} eval1 / {} of {} eval2 approach frames; aggregate matches {agg_ok}; {:.1}s",
            a.0 + b.0,
            a.1 + b.1,
            a.2 + b.2,
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    // `cargo test -- <filter>` style arguments select criteria by name.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 9] = [
        ("PRIMARY", "metric formula oracles", metric_oracles),
        ("PRIMARY", "reference-value arithmetic", reference_arithmetic),
        ("PRIMARY", "shortcut demonstration", shortcut_demo),
        ("PRIMARY", "visual-variant invariance", visual_invariance),
        ("PRIMARY", "patch semantics", patch_semantics),
        ("PRIMARY", "protocol statistics", protocol_statistics),
        ("PRIMARY", "determinism", determinism),
        ("PRIMARY", "bootstrap behavior", bootstrap_behavior),
        ("SECONDARY", "end-to-end session", end_to_end_session),
    ];
    let mut failed = 0;
    for (tier, name, criterion) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let verdict = std::panic::catch_unwind(criterion).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("PASS [{tier}] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{tier}] {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
