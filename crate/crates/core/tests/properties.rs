use dualdrive_core::control::path::PathPointMeta;
use dualdrive_core::control::planner::{sample_at, PlanContext, PlannerConfig};
use dualdrive_core::control::{densify, plan, DensePath, FrenetState, LaneContext, ObstaclePrediction, Pid, PidGains};
use dualdrive_core::dual::{
    parse_decision, CreatedAt, Experience, HistoryQueue, HistoryRecord, MemoryBank, MetaAction, NavManeuver,
    NavigationHint, Provenance, ReasonerBackend, RuleOracle, DecisionRequest,
};
use dualdrive_core::encoder::{encode, partition_pairs, EncoderConfig, EncoderParams, KeyDictionary, LabelRule, Labels};
use dualdrive_core::geometry::OrientedBox;
use dualdrive_core::harness::{compute_metrics, EndReason, LogRecord, PenaltyTable};
use dualdrive_core::math::Vec2;
use dualdrive_core::perceiver::{
    CriticalObject, Direction, EgoContext, EgoFrameBox, LaneRelation, ReasonTag, SceneDescription, Semantic, Trend,
};
use dualdrive_core::sim::scenario::LightPhase;
use dualdrive_core::sim::world::{route_progress, AccidentInfo, AccidentKind, ProgressTracker};
use dualdrive_core::sim::{step_vehicle, Control, Lane, LaneGraph, Polyline, VehicleLimits, VehicleState};
use dualdrive_core::token::SceneToken;
use proptest::prelude::*;

fn arc_points(r: f64, sweep: f64, n: usize) -> Vec<Vec2> {
    (0..=n)
        .map(|i| {
            let a = -std::f64::consts::FRAC_PI_2 + sweep * i as f64 / n as f64;
            Vec2::new(r * a.cos(), r + r * a.sin())
        })
        .collect()
}

fn meta() -> PathPointMeta {
    PathPointMeta { lane: 0, width: 3.5, lanes_left: 1, lanes_right: 0 }
}

fn corners(b: &OrientedBox) -> [Vec2; 4] {
    let (c, s) = (b.heading.cos(), b.heading.sin());
    let f = Vec2::new(c * b.half_length, s * b.half_length);
    let l = Vec2::new(-s * b.half_width, c * b.half_width);
    [b.center + f + l, b.center + f - l, b.center - f - l, b.center - f + l]
}

/// Plain separating-axis test, written without the library's geometry.
fn boxes_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let (ca, cb) = (corners(a), corners(b));
    let axes = [a.heading, a.heading + std::f64::consts::FRAC_PI_2, b.heading, b.heading + std::f64::consts::FRAC_PI_2];
    axes.iter().all(|&t| {
        let ax = Vec2::new(t.cos(), t.sin());
        let proj = |cs: &[Vec2; 4]| {
            cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let v = p.x * ax.x + p.y * ax.y;
                (lo.min(v), hi.max(v))
            })
        };
        let ((alo, ahi), (blo, bhi)) = (proj(&ca), proj(&cb));
        ahi >= blo && bhi >= alo
    })
}

fn blank_description(speed: f64) -> SceneDescription {
    SceneDescription {
        frame: 0,
        objects: vec![],
        ego: EgoContext { speed, accel: 0.0, lane: Some(0), lanes_left: 1, lanes_right: 1, junction_distance: None },
        summary: String::new(),
    }
}

fn experience(token: Vec<f64>, i: u64) -> Experience {
    Experience {
        token: SceneToken(token),
        description: blank_description(0.0),
        reasoning: String::new(),
        decision: MetaAction::Idle,
        provenance: Provenance::Analytic,
        fallback: false,
        created_at: CreatedAt { episode: 0, timestep: i },
    }
}

const SEMANTICS: [Semantic; 6] =
    [Semantic::Vehicle, Semantic::Cyclist, Semantic::Pedestrian, Semantic::TrafficLight, Semantic::StopSign, Semantic::Static];
const RELATIONS: [LaneRelation; 5] =
    [LaneRelation::Same, LaneRelation::Left, LaneRelation::Right, LaneRelation::Oncoming, LaneRelation::Crossing];
const MANEUVERS: [NavManeuver; 5] =
    [NavManeuver::Straight, NavManeuver::Left, NavManeuver::Right, NavManeuver::LaneChangeLeft, NavManeuver::LaneChangeRight];
const ACTIONS: [MetaAction; 6] =
    [MetaAction::Ac, MetaAction::Dc, MetaAction::Lcl, MetaAction::Lcr, MetaAction::Idle, MetaAction::Stop];

fn object() -> impl Strategy<Value = CriticalObject> {
    (0..6usize, 0..5usize, -40.0..80.0f64, -10.0..10.0f64, 0.0..80.0f64, -15.0..15.0f64, 0..4usize).prop_map(
        |(sem, rel, x, y, distance, closing, phase)| CriticalObject {
            id: 1,
            semantic: SEMANTICS[sem],
            bbox: EgoFrameBox { x, y, heading: 0.0, length: 4.8, width: 2.0 },
            relation: RELATIONS[rel],
            distance,
            direction: Direction::SameDirection,
            closing_speed: closing,
            trend: Trend::Static,
            speed: 5.0,
            reasoning: ReasonTag::FollowLead,
            light_phase: [None, Some(LightPhase::Red), Some(LightPhase::Yellow), Some(LightPhase::Green)][phase],
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn densified_spacing_stays_in_band(length in 1.0..300.0f64, r in 12.0..200.0f64, sweep in 0.2..1.5f64, curved in any::<bool>()) {
        let (pts, route) = if curved {
            let n = ((r * sweep) / 4.0).ceil() as usize;
            let p = arc_points(r, sweep, n);
            let route = vec![p[0], p[n]];
            (p, route)
        } else {
            let n = (length / 5.0).ceil() as usize;
            let p: Vec<Vec2> = (0..=n).map(|i| Vec2::new(length * i as f64 / n as f64, 0.0)).collect();
            (p, vec![Vec2::new(0.0, 0.0), Vec2::new(length, 0.0)])
        };
        let graph = LaneGraph::new(vec![Lane::new(0, pts, 3.5)]).unwrap();
        let path = densify(&route, &graph).unwrap();
        let cum = path.line().cumulative();
        for w in cum.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!((0.5..=1.5).contains(&(w[1] - w[0])), "spacing {}", w[1] - w[0]);
        }
    }

    #[test]
    fn frenet_round_trip_within_a_lane_width(r in 20.0..300.0f64, u in 0.05..0.95f64, d in -3.5..3.5f64) {
        let pts: Vec<Vec2> = {
            let n = (r * 1.2).ceil() as usize;
            arc_points(r, 1.2, n)
        };
        let path = DensePath::from_points(pts, meta()).unwrap();
        let s = u * path.length();
        let p = path.to_world(s, d);
        let (s2, d2) = path.to_frenet(p).unwrap();
        prop_assert!((s2 - s).abs() < 0.01 && (d2 - d).abs() < 0.01, "({s}, {d}) -> ({s2}, {d2})");
        prop_assert!(path.to_world(s2, d2).distance(p) < 0.01);
    }

    #[test]
    fn retrieval_ignores_uniform_scaling(seed in any::<u64>(), scale in 1e-3..1e3f64, k in 1..6usize) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tokens: Vec<Vec<f64>> = (0..40).map(|_| (0..256).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let query = SceneToken((0..256).map(|_| StandardNormal.sample(&mut rng)).collect());
        let mut a = MemoryBank::new();
        let mut b = MemoryBank::new();
        for (i, t) in tokens.iter().enumerate() {
            a.insert(experience(t.clone(), i as u64)).unwrap();
            b.insert(experience(t.iter().map(|x| x * scale).collect(), i as u64)).unwrap();
        }
        let ia: Vec<usize> = a.retrieve_topk(&query, k).unwrap().into_iter().map(|p| p.0).collect();
        let ib: Vec<usize> = b.retrieve_topk(&query, k).unwrap().into_iter().map(|p| p.0).collect();
        prop_assert_eq!(ia, ib);
    }

    #[test]
    fn history_keeps_the_last_ten(n in 0..40usize) {
        let mut q = HistoryQueue::default();
        for i in 0..n {
            q.push(HistoryRecord {
                tick: i as u64,
                time: i as f64,
                token: SceneToken(vec![1.0; 4]),
                description: blank_description(0.0),
                nav: NavigationHint { maneuver: NavManeuver::Straight, distance: f64::INFINITY, target_speed: 10.0 },
                reasoning: String::new(),
                decision: MetaAction::Idle,
            });
            prop_assert!(q.len() <= 10);
        }
        let ticks: Vec<u64> = q.iter().map(|r| r.tick).collect();
        let want: Vec<u64> = (n.saturating_sub(10)..n).map(|i| i as u64).collect();
        prop_assert_eq!(ticks, want);
    }

    #[test]
    fn driving_score_is_the_product(progress in proptest::collection::vec(0.0..1.2f64, 1..6), kinds in proptest::collection::vec(0..5usize, 0..6)) {
        const KINDS: [AccidentKind; 5] = [
            AccidentKind::CollisionVehicle,
            AccidentKind::CollisionPedestrian,
            AccidentKind::CollisionStatic,
            AccidentKind::OffRoad,
            AccidentKind::RedLightViolation,
        ];
        let mut log: Vec<LogRecord> = kinds
            .iter()
            .map(|&k| LogRecord::Accident(AccidentInfo { kind: KINDS[k], timestep: 0, time: 0.0, objects: vec![], location: Vec2::ZERO }))
            .collect();
        for &p in &progress {
            log.push(LogRecord::End { tick: 0, time: 0.0, route_progress: p, reason: EndReason::SimTimeLimit });
        }
        let table = PenaltyTable::default();
        let m = compute_metrics(&log, &table);
        prop_assert_eq!(m.ds, m.rc * m.is);
        let best = progress.iter().cloned().fold(0.0, f64::max).min(1.0);
        prop_assert!((m.rc - 100.0 * best).abs() < 1e-9);
        let is: f64 = kinds.iter().map(|&k| table.penalty(KINDS[k])).product();
        prop_assert!((m.is - is).abs() < 1e-12 && m.is > 0.0 && m.is <= 1.0);
    }

    #[test]
    fn rule_oracle_answers_every_scene(
        objects in proptest::collection::vec(object(), 0..6),
        speed in 0.0..20.0f64,
        lanes in (0..2u8, 0..2u8),
        nav in (0..5usize, 0.0..100.0f64),
    ) {
        let mut d = blank_description(speed);
        d.ego.lanes_left = lanes.0;
        d.ego.lanes_right = lanes.1;
        d.objects = objects;
        let nav = NavigationHint { maneuver: MANEUVERS[nav.0], distance: nav.1, target_speed: 10.0 };
        let req = DecisionRequest { system: String::new(), prompt: String::new(), shots: vec![], description: d, nav };
        let raw = RuleOracle::default().complete(&req).unwrap();
        let parsed = parse_decision(&raw).unwrap();
        prop_assert!(ACTIONS.contains(&parsed.action));
        prop_assert_eq!(raw, RuleOracle::default().complete(&req).unwrap());
    }

    #[test]
    fn partition_is_a_disjoint_cover(q in -1.0..1.0f64, keys in proptest::collection::vec(-1.0..1.0f64, 0..50), sigma in 0.01..0.5f64, conc in any::<bool>()) {
        let rule = if conc { LabelRule::Concurrence } else { LabelRule::Threshold };
        let (pos, neg) = partition_pairs(q, &keys, sigma, rule);
        let mut all: Vec<usize> = pos.iter().chain(&neg).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..keys.len()).collect::<Vec<_>>());
        prop_assert!(pos.iter().all(|i| !neg.contains(i)));
    }

    #[test]
    fn vehicle_speed_stays_physical(v0 in 0.0..30.0f64, throttle in -0.5..1.5f64, brake in 0.0..1.5f64, steer in -2.0..2.0f64, dt in 0.001..0.1f64) {
        let limits = VehicleLimits::default();
        let s = VehicleState::new(Vec2::ZERO, 0.3, v0);
        let next = step_vehicle(&s, Control { throttle, brake, steer }, dt, &limits);
        prop_assert!(next.speed >= 0.0 && next.position.x.is_finite() && next.position.y.is_finite());
        prop_assert!(next.steer.abs() <= limits.max_steer + 1e-12);
        let coast = step_vehicle(&s, Control { throttle: 0.0, brake: brake.max(0.01), steer }, dt, &limits);
        prop_assert!(coast.speed <= s.speed);
    }

    #[test]
    fn pid_window_is_bounded(errors in proptest::collection::vec(-20.0..20.0f64, 0..50)) {
        let mut pid = Pid::new(PidGains::LONGITUDINAL);
        for e in errors {
            pid.step(e, 0.05);
            prop_assert!(pid.buffer().len() <= 10);
        }
    }

    #[test]
    fn progress_is_monotone_and_ignores_lateral_offset(xs in proptest::collection::vec(0.0..220.0f64, 1..30), offset in -3.4..3.4f64) {
        let route = Polyline::new((0..=200).map(|i| Vec2::new(i as f64, 0.0)).collect());
        let mut tracker = ProgressTracker::default();
        let mut last = 0.0;
        for x in xs {
            let p = tracker.update(&route, Vec2::new(x, 0.0));
            prop_assert!(p >= last);
            last = p;
            let on = route_progress(&route, Vec2::new(x, 0.0));
            let off = route_progress(&route, Vec2::new(x, offset));
            prop_assert!((on - off).abs() < 1e-12);
        }
    }

    #[test]
    fn dictionary_is_a_bounded_fifo(batches in proptest::collection::vec(1..20usize, 1..12), cap in 1..40usize) {
        let mut dict = KeyDictionary::new(cap);
        let mut next = 0usize;
        for b in batches {
            let batch = (0..b).map(|i| (vec![(next + i) as f64], Labels { steer: 0.0, brake: 0.0 })).collect();
            dict.push(batch);
            next += b;
            prop_assert!(dict.len() <= cap);
            let ids: Vec<usize> = dict.iter().map(|(k, _)| k[0] as usize).collect();
            let want: Vec<usize> = (next - dict.len()..next).collect();
            prop_assert_eq!(ids, want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn token_halves_are_unit_norm(seed in any::<u64>(), speed in 0.0..20.0f64, intent in 0..8usize) {
        use rand::{Rng, SeedableRng};
        let cfg = EncoderConfig { grid_n: 4, grid_c: 16, ego_hidden: 16, ..EncoderConfig::default() };
        let params = EncoderParams::init(&cfg, seed).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
        let features: Vec<f64> = (0..cfg.grid_n * cfg.grid_c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ego = dualdrive_core::encoder::ego_vector(intent, speed);
        let t = encode(&params, &features, &ego).unwrap();
        for half in [t.act(), t.acc()] {
            let n = half.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn chosen_trajectories_avoid_predicted_obstacles(
        ego_speed in 0.0..14.0f64,
        obs_s in 6.0..60.0f64,
        obs_lane in 0..2usize,
        obs_speed in 0.0..10.0f64,
        action in 0..6usize,
    ) {
        let path = DensePath::from_points((0..=300).map(|i| Vec2::new(i as f64, 0.0)).collect(), meta()).unwrap();
        let ob = ObstaclePrediction {
            id: 1,
            footprint: OrientedBox::new(Vec2::new(5.0 + obs_s, 3.5 * obs_lane as f64), 0.0, 2.4, 1.0),
            velocity: Vec2::new(obs_speed, 0.0),
        };
        let obstacles = [ob];
        let lane = LaneContext { width: 3.5, d_ref: 0.0, left_available: true, right_available: false, stop_distance: None };
        let ctx = PlanContext { path: &path, lane, target_speed: 10.0, obstacles: &obstacles, ego_half_extents: (2.4, 1.0) };
        let ego = FrenetState { s: 5.0, s_d: ego_speed, ..Default::default() };
        let cfg = PlannerConfig::default();
        let Ok(traj) = plan(ACTIONS[action], &ego, &ctx, &cfg) else {
            return Ok(());
        };
        if traj.emergency {
            return Ok(());
        }
        let horizon = traj.samples.last().unwrap().t;
        let n = (horizon / (cfg.dt / 4.0)).round() as usize;
        for i in 0..=n {
            let t = i as f64 * cfg.dt / 4.0;
            let smp = sample_at(&path, &traj.lon, &traj.lat, t);
            let ego_box = OrientedBox::new(smp.position, smp.heading, 2.4, 1.0);
            let ob_box = OrientedBox::new(ob.footprint.center + ob.velocity * t, 0.0, 2.4, 1.0);
            prop_assert!(!boxes_overlap(&ego_box, &ob_box), "{:?} overlaps at t = {t:.4}", ACTIONS[action]);
        }
    }
}
