//! Mixed host lists for allowlist filtering, labelled by construction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostClass {
    Allowlisted,
    Local,
    External,
}

#[derive(Debug, Clone)]
pub struct HostMix {
    pub hosts: Vec<(String, HostClass)>,
    /// Registrable domains, one per allowlisted host family.
    pub allowlist: Vec<String>,
}

fn local_literal<R: Rng>(rng: &mut R, i: usize) -> String {
    match i % 6 {
        0 => format!("127.0.{}.{}", rng.gen_range(0..255), rng.gen_range(1..255)),
        1 => format!("10.{}.{}.{}", rng.gen_range(0..255), rng.gen_range(0..255), rng.gen_range(1..255)),
        2 => format!("192.168.{}.{}", rng.gen_range(0..255), rng.gen_range(1..255)),
        3 => format!("172.{}.{}.{}", rng.gen_range(16..32), rng.gen_range(0..255), rng.gen_range(1..255)),
        4 => "localhost".to_string(),
        _ => format!("fd{:02x}::{:x}", rng.gen_range(0..255), i),
    }
}

/// `total` hosts of which `allowlisted` fall under an allowlisted registrable
/// domain and `local` are loopback or private; the rest are external.
pub fn host_mix(seed: u64, total: usize, allowlisted: usize, local: usize) -> HostMix {
    assert!(allowlisted + local <= total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hosts = Vec::with_capacity(total);
    let mut allowlist = Vec::new();
    let suffixes = ["com", "net", "org", "co.uk", "io"];
    for i in 0..allowlisted {
        let domain = format!("popular{}.{}", i / 2, suffixes[i % suffixes.len()]);
        let host = match rng.gen_range(0..3) {
            0 => domain.clone(),
            1 => format!("cdn{i}.{domain}"),
            _ => format!("API.{}", domain.to_uppercase()),
        };
        allowlist.push(domain);
        hosts.push((host, HostClass::Allowlisted));
    }
    for i in 0..local {
        hosts.push((local_literal(&mut rng, i), HostClass::Local));
    }
    for i in 0..total - allowlisted - local {
        let host = if i % 10 == 9 {
            format!("203.0.113.{}", i % 250 + 1)
        } else {
            format!("ext{i}-{}.{}", rng.gen_range(0..1000), suffixes[i % suffixes.len()])
        };
        hosts.push((host, HostClass::External));
    }
    hosts.shuffle(&mut rng);
    allowlist.sort();
    allowlist.dedup();
    HostMix { hosts, allowlist }
}
