use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random leader-last adjacency. With `rooted`, every follower gets a parent among the
/// leader and earlier followers.
pub fn random_adjacency(rng: &mut ChaCha8Rng, max_agents: usize, rooted: bool) -> Vec<Vec<u8>> {
    let size = rng.random_range(2..=max_agents);
    let leader = size - 1;
    let density: f64 = rng.random_range(0.05..0.5);
    let mut adj = vec![vec![0u8; size]; size];
    for i in 0..leader {
        if rooted {
            let p = rng.random_range(0..=i);
            adj[i][if p == i { leader } else { p }] = 1;
        }
        for j in 0..size {
            if i != j && rng.random::<f64>() < density {
                adj[i][j] = 1;
            }
        }
    }
    adj
}
