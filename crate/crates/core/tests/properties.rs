use std::collections::HashMap;
use std::sync::Arc;

use drecsim::agents::{Agent, PolicyAgent, ReinforceConfig};
use drecsim::environment::{EnvConfig, Environment, Observation};
use drecsim::ingest::{
    build_utility_matrix, parse_movies, parse_ratings, parse_users, MovieDoc, RatingRecord, UserProfile, GENRES,
};
use drecsim::neural::{Activation, Network, NetworkSpec, OutputKind};
use drecsim::replay::{Experience, PrioritizedBuffer, ReplayConfig};
use drecsim::simulator::{factorize, NmfOptions, Simulator};
use drecsim::synthetic::{SyntheticData, SyntheticSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn latin1(s: &str) -> Vec<u8> {
    s.chars()
        .map(|c| u8::try_from(c as u32).expect("latin-1 char"))
        .collect()
}

fn small_sim(seed: u64) -> Arc<Simulator> {
    let d = SyntheticData::generate(&SyntheticSpec {
        users: 20,
        movies: 30,
        ratings_per_user: 10,
        seed,
        ..Default::default()
    });
    let u = build_utility_matrix(&d.ratings, &d.users, &d.movies).unwrap();
    let f = factorize(
        &u,
        &NmfOptions {
            components: 3,
            max_iters: 15,
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    Arc::new(Simulator::new(f.model, d.users, d.movies).unwrap())
}

proptest! {
    #[test]
    fn rating_lines_round_trip(
        user_id in 1u32..100_000,
        movie_id in 1u32..100_000,
        rating in 1u8..=5,
        timestamp in 0i64..2_000_000_000,
    ) {
        let line = format!("{user_id}::{movie_id}::{rating}::{timestamp}");
        let parsed = parse_ratings(format!("{line}\n").as_bytes()).unwrap();
        prop_assert_eq!(parsed.len(), 1);
        prop_assert_eq!(parsed[0].to_string(), line);
    }

    #[test]
    fn user_lines_round_trip(
        user_id in 1u32..10_000,
        female in any::<bool>(),
        age in prop::sample::select(vec![1u8, 18, 25, 35, 45, 50, 56]),
        occupation in 0u8..=20,
        zip in "[0-9]{5}(-[0-9]{4})?",
    ) {
        let line = format!("{user_id}::{}::{age}::{occupation}::{zip}", if female { "F" } else { "M" });
        let parsed = parse_users(format!("{line}\n").as_bytes()).unwrap();
        prop_assert_eq!(parsed[0].to_string(), line);
    }

    #[test]
    fn movie_lines_round_trip(
        movie_id in 1u32..5000,
        title in "[A-Za-zéüñ][A-Za-zéüñ ,'&.-]{0,24}[A-Za-z]",
        year in 1919i32..2001,
        mask in 1u32..(1 << 18),
    ) {
        let genres: Vec<&str> = (0..18).filter(|b| mask & (1 << b) != 0).map(|b| GENRES[b + 1]).collect();
        let line = format!("{movie_id}::{title} ({year})::{}", genres.join("|"));
        let parsed = parse_movies(&latin1(&format!("{line}\n"))[..], &HashMap::new()).unwrap();
        prop_assert_eq!(parsed[0].to_line(), line);
        prop_assert_eq!(parsed[0].genres.len(), 19);
        prop_assert!(parsed[0].genres.contains(&1));
    }

    #[test]
    fn matrix_entries_bounded_by_ratings(
        triples in prop::collection::vec((1u32..6, 1u32..8, 1u8..=5), 1..60),
    ) {
        let users: Vec<UserProfile> = parse_users(
            (1..6).map(|i| format!("{i}::M::25::1::00000\n")).collect::<String>().as_bytes(),
        )
        .unwrap();
        let movies: Vec<MovieDoc> = parse_movies(
            (1..8).map(|i| format!("{i}::T{i} (1990)::Drama\n")).collect::<String>().as_bytes(),
            &HashMap::new(),
        )
        .unwrap();
        let ratings: Vec<RatingRecord> = triples
            .iter()
            .enumerate()
            .map(|(t, &(u, m, r))| RatingRecord { user_id: u, movie_id: m, rating: r, timestamp: t as i64 })
            .collect();
        let um = build_utility_matrix(&ratings, &users, &movies).unwrap();
        let distinct: std::collections::HashSet<(u32, u32)> = triples.iter().map(|&(u, m, _)| (u, m)).collect();
        prop_assert!(um.len() <= ratings.len());
        prop_assert_eq!(um.len(), distinct.len());
        // duplicates keep the latest timestamp
        for &(u, m) in &distinct {
            let last = ratings.iter().rev().find(|r| r.user_id == u && r.movie_id == m).unwrap();
            prop_assert_eq!(um.get(u as usize - 1, m as usize - 1), Some(last.rating));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn factorization_is_bitwise_deterministic(seed in 0u64..50) {
        let d = SyntheticData::generate(&SyntheticSpec { users: 15, movies: 20, ratings_per_user: 6, seed, ..Default::default() });
        let u = build_utility_matrix(&d.ratings, &d.users, &d.movies).unwrap();
        let opts = NmfOptions { components: 3, max_iters: 10, seed, ..Default::default() };
        let a = factorize(&u, &opts).unwrap();
        let b = factorize(&u, &opts).unwrap();
        prop_assert_eq!(a.model.w(), b.model.w());
        prop_assert_eq!(a.model.h(), b.model.h());
        prop_assert!(a.model.w().iter().chain(a.model.h()).all(|&x| x >= 0.0));
    }

    #[test]
    fn episodes_are_bounded_and_reproducible(
        seed in 0u64..1000,
        actions in prop::collection::vec(0usize..30, 50),
        wv in prop::sample::select(vec![0.0, 0.5]),
    ) {
        let sim = small_sim(seed % 3);
        let cfg = EnvConfig { violence_weight: wv, seed, ..Default::default() };
        let play = || {
            let mut env = Environment::new(Arc::clone(&sim), cfg).unwrap();
            let mut obs = vec![env.reset(None)];
            let mut rewards = Vec::new();
            let mut ratings = Vec::new();
            for &a in &actions {
                let r = env.step(a).unwrap();
                prop_assert!((0.0..=5.0).contains(&r.rating));
                obs.push(r.observation);
                rewards.push(r.reward);
                ratings.push(r.rating);
            }
            prop_assert!(env.step(0).is_err());
            Ok((obs, rewards, ratings))
        };
        let (o1, r1, ratings) = play()?;
        let (o2, r2, _) = play()?;
        prop_assert_eq!(&o1, &o2);
        prop_assert_eq!(&r1, &r2);
        let ret: f64 = r1.iter().sum();
        prop_assert!((0.0..=50.0).contains(&ret));
        if wv == 0.0 {
            prop_assert!((ret - ratings.iter().sum::<f64>() / 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn priorities_floor_and_fifo_eviction(
        tds in prop::collection::vec(-2.0f64..2.0, 1..40),
        stores in 1usize..60,
    ) {
        let cap = 16;
        let mut b = PrioritizedBuffer::new(ReplayConfig { capacity: cap, burn_in: 0, ..Default::default() }).unwrap();
        let mk = |i: usize| {
            let mut s = Observation::zeros();
            s.0[0] = i as f64;
            Experience { state: s, action: i, reward: 0.0, done: false, next_state: s }
        };
        for i in 0..stores {
            b.store(mk(i));
        }
        prop_assert_eq!(b.len(), stores.min(cap));
        let mut kept: Vec<usize> = (0..b.len()).map(|i| b.get(i).unwrap().action).collect();
        kept.sort_unstable();
        let expected: Vec<usize> = (stores.saturating_sub(cap)..stores).collect();
        prop_assert_eq!(kept, expected);
        let idx: Vec<usize> = (0..tds.len()).map(|i| i % b.len()).collect();
        b.update_priorities(&idx, &tds).unwrap();
        prop_assert!(b.priorities().iter().all(|&p| p >= 0.01));
    }

    #[test]
    fn softmax_outputs_stay_finite(scale in 1.0f64..1e6, seed in 0u64..100) {
        let spec = NetworkSpec {
            input_size: 25,
            hidden: vec![8],
            activation: Activation::Relu,
            output: OutputKind::Softmax,
            output_size: 12,
            noisy: false,
            noise_sigma: 0.0,
            dueling_subnet_size: 0,
        };
        let net = Network::new(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let x: Vec<f64> = (0..25).map(|i| scale * ((i % 7) as f64 - 3.0)).collect();
        let p = net.forward(&x).unwrap();
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn policy_stays_a_distribution_and_top_k_nests(seed in 0u64..100, episodes in 1usize..6) {
        let mut agent = PolicyAgent::reinforce(
            ReinforceConfig { hidden: vec![6], learning_rate: 0.05, ..Default::default() },
            7,
            seed,
        )
        .unwrap();
        let s = Observation([0.3; 25]);
        for e in 0..episodes {
            for t in 0..5 {
                let a = agent.act(&s);
                agent
                    .observe(Experience { state: s, action: a, reward: ((e + t) % 3) as f64, done: t == 4, next_state: s })
                    .unwrap();
            }
            agent.end_episode().unwrap();
            let p = agent.probabilities(&s);
            prop_assert!(p.iter().all(|&x| x.is_finite() && x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for k in 0..7 {
            let short = agent.top_k(&s, k).unwrap();
            let long = agent.top_k(&s, k + 1).unwrap();
            prop_assert_eq!(&long[..k], &short[..]);
        }
    }
}
