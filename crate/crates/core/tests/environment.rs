use std::sync::Arc;

use drecsim::environment::{encode_user, EnvConfig, Environment, OBS_DIM};
use drecsim::ingest::GENRE_COUNT;
use drecsim::simulator::{factorize, NmfOptions, Simulator};
use drecsim::synthetic::{SyntheticData, SyntheticSpec};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simulator() -> Arc<Simulator> {
    let d = SyntheticData::generate(&SyntheticSpec::default());
    let u = drecsim::ingest::build_utility_matrix(&d.ratings, &d.users, &d.movies).unwrap();
    let f = factorize(
        &u,
        &NmfOptions {
            components: 4,
            max_iters: 30,
            ..Default::default()
        },
    )
    .unwrap();
    Arc::new(Simulator::new(f.model, d.users, d.movies).unwrap())
}

#[test]
fn resets_encode_the_sampled_user() {
    let sim = simulator();
    let mut env = Environment::new(Arc::clone(&sim), EnvConfig::default()).unwrap();
    for _ in 0..1000 {
        let obs = env.reset(None);
        let user = env.current_user().unwrap();
        assert!(obs.0[..21].iter().all(|&x| x == 0.0));
        assert_eq!(obs.0[21..], encode_user(&user.profile));
        assert_eq!(user.embedding, sim.model().user_row(user.user_index));
        assert!(obs.0.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}

#[test]
fn single_steps_follow_the_rating_model() {
    let sim = simulator();
    let mut env = Environment::new(Arc::clone(&sim), EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    env.reset(Some(3));
    for t in 0..50 {
        let user = env.current_user().unwrap().clone();
        let a = rng.random_range(0..env.n_actions());
        let expected: f64 = user
            .embedding
            .iter()
            .zip(sim.model().movie_column(a))
            .map(|(w, h)| w * h)
            .sum::<f64>()
            .clamp(0.0, 5.0);
        let res = env.step(a).unwrap();
        assert_eq!(res.rating, expected);
        assert_eq!(res.reward, expected / 5.0);
        assert_eq!(res.done, t == 49);
        let movie = &sim.movies()[a];
        let genres: Vec<f64> = movie.genres.iter().map(|&g| g as f64).collect();
        assert_eq!(res.observation.0[..GENRE_COUNT], genres[..]);
        assert_eq!(res.observation.0[19], expected / 5.0);
        assert_eq!(res.observation.0[20], movie.violence);
        assert_eq!(res.observation.0.len(), OBS_DIM);
    }
    assert!(env.step(0).is_err());
}

#[test]
fn slate_choice_is_brute_force_argmax() {
    let sim = simulator();
    let cfg = EnvConfig {
        slate_size: 6,
        ..Default::default()
    };
    let mut env = Environment::new(Arc::clone(&sim), cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for ep in 0..20 {
        env.reset(Some(ep));
        for _ in 0..50 {
            let slate = sample(&mut rng, env.n_actions(), 6).into_vec();
            let user = env.current_user().unwrap().clone();
            let ratings: Vec<f64> = slate.iter().map(|&m| sim.predict(&user, m).unwrap()).collect();
            let mut best: Option<(f64, usize)> = None;
            for (&m, &r) in slate.iter().zip(&ratings) {
                best = match best {
                    Some((br, bm)) if br > r || (br == r && bm < m) => Some((br, bm)),
                    _ => Some((r, m)),
                };
            }
            let res = env.step_slate(&slate).unwrap();
            assert_eq!(res.slate_ratings, ratings);
            assert_eq!((res.rating, res.chosen_index), best.unwrap());
        }
    }
}

#[test]
fn violence_weight_mixes_reward() {
    let sim = simulator();
    let cfg = EnvConfig {
        violence_weight: 0.3,
        ..Default::default()
    };
    let mut env = Environment::new(Arc::clone(&sim), cfg).unwrap();
    env.reset(Some(1));
    for a in 0..20 {
        let res = env.step(a).unwrap();
        let v = sim.movies()[a].violence;
        let want = 0.7 * res.rating / 5.0 + 0.3 * (1.0 - v);
        assert!((res.reward - want).abs() < 1e-15);
    }
}

#[test]
fn seeded_episodes_repeat() {
    let sim = simulator();
    let run = || {
        let mut env = Environment::new(Arc::clone(&sim), EnvConfig::default()).unwrap();
        let mut out = Vec::new();
        for _ in 0..5 {
            env.reset(None);
            for a in 0..50 {
                out.push(env.step(a).unwrap().reward);
            }
        }
        out
    };
    assert_eq!(run(), run());
}
