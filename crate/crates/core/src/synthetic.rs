//! Small MovieLens-format datasets generated from a planted low-rank rating
//! model. Used by tests, examples and smoke runs when the real data is not
//! at hand.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ingest::{MovieDoc, RatingRecord, Sex, UserProfile, AGE_BUCKETS, GENRE_COUNT, MAX_OCCUPATION};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub movies: usize,
    pub rank: usize,
    pub ratings_per_user: usize,
    /// Standard deviation of the rating noise, in stars.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 60,
            movies: 80,
            rank: 4,
            ratings_per_user: 20,
            noise: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub ratings: Vec<RatingRecord>,
    pub users: Vec<UserProfile>,
    pub movies: Vec<MovieDoc>,
}

impl SyntheticData {
    pub fn generate(spec: &SyntheticSpec) -> Self {
        assert!(spec.users > 0 && spec.movies > 0 && spec.rank > 0);
        assert!(spec.ratings_per_user >= 1 && spec.ratings_per_user <= spec.movies);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let users: Vec<UserProfile> = (0..spec.users)
            .map(|i| UserProfile {
                user_id: i as u32 + 1,
                sex: if rng.random_bool(0.5) { Sex::M } else { Sex::F },
                age: AGE_BUCKETS[rng.random_range(0..AGE_BUCKETS.len())],
                occupation: rng.random_range(0..=MAX_OCCUPATION),
                zip_code: format!("{:05}", rng.random_range(0..100_000u32)),
            })
            .collect();
        let movies: Vec<MovieDoc> = (0..spec.movies)
            .map(|j| {
                let mut genres = [0u8; GENRE_COUNT];
                for g in sample(&mut rng, GENRE_COUNT - 1, 1 + j % 3).into_iter() {
                    genres[g + 1] = 1;
                }
                MovieDoc {
                    // sparse ids so the dense remap is exercised
                    movie_id: 3 * j as u32 + 2,
                    title: format!("Synthetic Feature {j}"),
                    year: 1950 + (j % 50) as i32,
                    genres,
                    violence: (rng.random::<f64>() * 1000.0).round() / 1000.0,
                }
            })
            .collect();

        let user_f: Vec<Vec<f64>> = (0..spec.users)
            .map(|_| (0..spec.rank).map(|_| rng.random::<f64>()).collect())
            .collect();
        let movie_f: Vec<Vec<f64>> = (0..spec.movies)
            .map(|_| (0..spec.rank).map(|_| rng.random::<f64>()).collect())
            .collect();
        let normal = rand_distr::Normal::new(0.0, spec.noise.max(0.0)).expect("finite noise");
        let mut ratings = Vec::with_capacity(spec.users * spec.ratings_per_user);
        let mut ts = 978_300_000i64;
        for (i, uf) in user_f.iter().enumerate() {
            let picks = sample(&mut rng, spec.movies, spec.ratings_per_user).into_vec();
            for j in picks {
                let affinity: f64 = uf.iter().zip(&movie_f[j]).map(|(a, b)| a * b).sum::<f64>() / spec.rank as f64;
                // affinity has mean 1/4 per component; spread it over 1..5
                let stars = 1.0 + 4.0 * (2.0 * affinity).min(1.0) + rng.sample(normal);
                ratings.push(RatingRecord {
                    user_id: users[i].user_id,
                    movie_id: movies[j].movie_id,
                    rating: stars.round().clamp(1.0, 5.0) as u8,
                    timestamp: ts,
                });
                ts += 1 + rng.random_range(0..60);
            }
        }
        Self { ratings, users, movies }
    }

    /// Writes `ratings.dat`, `users.dat`, `movies.dat` and `violence.csv`.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut ratings = String::new();
        for r in &self.ratings {
            writeln!(ratings, "{r}").expect("string write");
        }
        std::fs::write(dir.join("ratings.dat"), ratings)?;
        let mut users = String::new();
        for u in &self.users {
            writeln!(users, "{u}").expect("string write");
        }
        std::fs::write(dir.join("users.dat"), users)?;
        let mut movies = String::new();
        let mut violence = String::from("movie_id,score\n");
        for m in &self.movies {
            writeln!(movies, "{}", m.to_line()).expect("string write");
            writeln!(violence, "{},{}", m.movie_id, m.violence).expect("string write");
        }
        std::fs::write(dir.join("movies.dat"), movies)?;
        std::fs::write(dir.join("violence.csv"), violence)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Dataset;

    #[test]
    fn written_files_parse_back() {
        let data = SyntheticData::generate(&SyntheticSpec::default());
        let dir = tempfile::tempdir().unwrap();
        data.write_to_dir(dir.path()).unwrap();
        let back = Dataset::load(dir.path(), Some(&dir.path().join("violence.csv"))).unwrap();
        assert_eq!(back.ratings, data.ratings);
        assert_eq!(back.users, data.users);
        assert_eq!(back.movies, data.movies);
        let u = back.utility_matrix().unwrap();
        assert_eq!(u.len(), 60 * 20);
        assert!(u.entries().iter().all(|&(_, _, r)| (1..=5).contains(&r)));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = SyntheticData::generate(&SyntheticSpec::default());
        let b = SyntheticData::generate(&SyntheticSpec::default());
        assert_eq!(a.ratings, b.ratings);
        let c = SyntheticData::generate(&SyntheticSpec {
            seed: 1,
            ..Default::default()
        });
        assert_ne!(a.ratings, c.ratings);
    }
}
