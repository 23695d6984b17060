//! Problem-instance data model and the random scenario generator.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::math;
use crate::orchestrator::CostWeights;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NetworkFunction {
    pub id: u32,
    /// CPU cycles needed per bit of traffic.
    pub cycles_per_bit: f64,
    /// Storage footprint in MB while the function runs.
    pub storage_demand: f64,
}

/// An ordered chain of network functions plus its QoS floors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ServiceChain {
    pub id: u32,
    /// Descriptive endpoint labels; no routing is derived from them.
    pub source_node: u32,
    pub destination_node: u32,
    /// Network-function ids in mandatory execution order.
    pub functions: Vec<u32>,
    pub deadline_s: f64,
    /// Minimum spectral efficiency in bps/Hz.
    pub min_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Server {
    pub id: u32,
    /// CPU cycles per second.
    pub cpu_capacity: f64,
    /// Storage and buffer capacity in MB.
    pub storage_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct UserRequest {
    pub id: u32,
    pub service: u32,
    pub distance_m: f64,
    /// Bits generated per unit time.
    pub packet_size_bits: f64,
}

/// An immutable problem instance.
///
/// `channel_gain` and `noise_power` are `U x K` row-major matrices indexed by
/// user position (not id) and subcarrier.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NetworkScenario {
    pub users: Vec<UserRequest>,
    pub servers: Vec<Server>,
    pub services: Vec<ServiceChain>,
    pub nf_catalog: Vec<NetworkFunction>,
    pub channel_gain: Vec<Vec<f64>>,
    pub noise_power: Vec<Vec<f64>>,
    pub num_subcarriers: usize,
    pub subcarrier_bandwidth_khz: f64,
    pub max_power_w: f64,
    pub rng_seed: u64,
}

impl NetworkScenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn service(&self, id: u32) -> Option<&ServiceChain> {
        self.services.iter().find(|s| s.id == id)
    }

    pub fn function(&self, id: u32) -> Option<&NetworkFunction> {
        self.nf_catalog.iter().find(|f| f.id == id)
    }

    /// Service chain requested by the user at position `u`.
    ///
    /// # Panics
    /// If the user references a service that is not in the catalog; run
    /// [`validate_scenario`] first on untrusted input.
    pub fn service_of(&self, u: usize) -> &ServiceChain {
        let sid = self.users[u].service;
        self.service(sid)
            .unwrap_or_else(|| panic!("user {} references missing service {sid}", self.users[u].id))
    }

    /// Resolved function list of the chain requested by user `u`.
    pub fn chain_of(&self, u: usize) -> Vec<&NetworkFunction> {
        self.service_of(u)
            .functions
            .iter()
            .map(|&f| {
                self.function(f)
                    .unwrap_or_else(|| panic!("service references missing function {f}"))
            })
            .collect()
    }

    pub fn rate_floor(&self, u: usize) -> f64 {
        self.service_of(u).min_rate
    }

    pub fn rate_floors(&self) -> Vec<f64> {
        (0..self.num_users()).map(|u| self.rate_floor(u)).collect()
    }

    pub fn deadline(&self, u: usize) -> f64 {
        self.service_of(u).deadline_s
    }

    pub fn packet_sizes(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.packet_size_bits).collect()
    }

    pub fn user_index(&self, id: u32) -> Option<usize> {
        self.users.iter().position(|u| u.id == id)
    }

    /// Copy of the scenario with only the users whose ids are in `keep`
    /// (original order and ids preserved, matrices trimmed accordingly).
    pub fn retain_users(&self, keep: &[u32]) -> NetworkScenario {
        let idx: Vec<usize> = (0..self.num_users())
            .filter(|&u| keep.contains(&self.users[u].id))
            .collect();
        NetworkScenario {
            users: idx.iter().map(|&u| self.users[u].clone()).collect(),
            channel_gain: idx.iter().map(|&u| self.channel_gain[u].clone()).collect(),
            noise_power: idx.iter().map(|&u| self.noise_power[u].clone()).collect(),
            ..self.clone()
        }
    }

    /// Copy of the scenario without the user whose id is `id`.
    pub fn without_user(&self, id: u32) -> NetworkScenario {
        let keep: Vec<u32> = self.users.iter().map(|u| u.id).filter(|&x| x != id).collect();
        self.retain_users(&keep)
    }
}

/// Inclusive `(min, max)` bounds of a uniformly drawn quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Bounds<T> {
    pub min: T,
    pub max: T,
}

impl<T> Bounds<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }
}

impl<T: PartialOrd> Bounds<T> {
    pub fn contains(&self, v: &T) -> bool {
        *v >= self.min && *v <= self.max
    }
}

/// Distributions and fixed parameters for [`generate_scenario`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ScenarioConfig {
    pub users: Bounds<usize>,
    pub servers: Bounds<usize>,
    pub services: Bounds<usize>,
    pub nfs_per_service: Bounds<usize>,
    /// Size M of the network-function catalog.
    pub num_functions: usize,
    pub cpu_capacity: Bounds<f64>,
    pub storage_capacity: Bounds<f64>,
    pub nf_storage: Bounds<f64>,
    pub cycles_per_bit: Bounds<f64>,
    pub deadline: Bounds<f64>,
    pub min_rate: Bounds<f64>,
    pub cell_radius_m: f64,
    pub pathloss_exp: f64,
    pub noise_w: f64,
    /// Mean of the exponentially distributed fading power.
    pub fading_mean: f64,
    pub num_subcarriers: usize,
    pub subcarrier_bandwidth_khz: f64,
    pub max_power_w: f64,
    /// Packet size in bits per unit of rate floor (`y_u = scale * R_min`).
    pub packet_bits_per_rate: f64,
    pub weights: CostWeights,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            users: Bounds::new(5, 50),
            servers: Bounds::new(15, 40),
            services: Bounds::new(10, 25),
            nfs_per_service: Bounds::new(5, 15),
            num_functions: 15,
            cpu_capacity: Bounds::new(1500.0, 3000.0),
            storage_capacity: Bounds::new(1000.0, 1500.0),
            nf_storage: Bounds::new(5.0, 15.0),
            cycles_per_bit: Bounds::new(5.0, 20.0),
            deadline: Bounds::new(0.3, 7.0),
            min_rate: Bounds::new(5.0, 20.0),
            cell_radius_m: 500.0,
            pathloss_exp: 3.0,
            noise_w: 1e-7,
            fading_mean: 1.0,
            num_subcarriers: 64,
            subcarrier_bandwidth_khz: 15.0,
            max_power_w: 40.0,
            packet_bits_per_rate: 1.0,
            weights: CostWeights::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), Error> {
        fn range<T: PartialOrd + core::fmt::Debug>(name: &str, b: &Bounds<T>) -> Result<(), Error> {
            if b.min > b.max {
                return Err(Error::InvalidConfig(format!("{name}: min {:?} > max {:?}", b.min, b.max)));
            }
            Ok(())
        }
        range("users", &self.users)?;
        range("servers", &self.servers)?;
        range("services", &self.services)?;
        range("nfs_per_service", &self.nfs_per_service)?;
        range("cpu_capacity", &self.cpu_capacity)?;
        range("storage_capacity", &self.storage_capacity)?;
        range("nf_storage", &self.nf_storage)?;
        range("cycles_per_bit", &self.cycles_per_bit)?;
        range("deadline", &self.deadline)?;
        range("min_rate", &self.min_rate)?;

        let positive = [
            ("cpu_capacity.min", self.cpu_capacity.min),
            ("storage_capacity.min", self.storage_capacity.min),
            ("cycles_per_bit.min", self.cycles_per_bit.min),
            ("deadline.min", self.deadline.min),
            ("cell_radius_m", self.cell_radius_m),
            ("pathloss_exp", self.pathloss_exp),
            ("noise_w", self.noise_w),
            ("fading_mean", self.fading_mean),
            ("subcarrier_bandwidth_khz", self.subcarrier_bandwidth_khz),
            ("max_power_w", self.max_power_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.nf_storage.min < 0.0 || self.min_rate.min < 0.0 || self.packet_bits_per_rate < 0.0 {
            return Err(Error::InvalidConfig("nf_storage, min_rate and packet_bits_per_rate must be >= 0".into()));
        }
        if self.num_subcarriers == 0 {
            return Err(Error::InvalidConfig("num_subcarriers must be >= 1".into()));
        }
        if self.servers.min == 0 || self.services.min == 0 || self.nfs_per_service.min == 0 {
            return Err(Error::InvalidConfig("servers, services and nfs_per_service need min >= 1".into()));
        }
        if self.nfs_per_service.max > self.num_functions {
            return Err(Error::InvalidConfig(format!(
                "nfs_per_service.max {} exceeds catalog size {}",
                self.nfs_per_service.max, self.num_functions
            )));
        }
        self.weights.validate()
    }
}

/// `h = fading * d^(-pathloss_exp)`.
pub fn channel_gain(distance_m: f64, fading_sample: f64, pathloss_exp: f64) -> Result<f64, Error> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain("distance must be positive"));
    }
    if !(fading_sample >= 0.0) {
        return Err(Error::Domain("fading sample must be non-negative"));
    }
    Ok(fading_sample * math::powf(distance_m, -pathloss_exp))
}

fn uniform<R: Rng>(rng: &mut R, b: Bounds<f64>) -> f64 {
    b.min + (b.max - b.min) * rng.random::<f64>()
}

fn uniform_int<R: Rng>(rng: &mut R, b: Bounds<usize>) -> usize {
    rng.random_range(b.min..=b.max)
}

/// Uniform draw from the open interval (0, 1).
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Exponentially distributed fading power with the given mean (Rayleigh amplitude).
pub fn sample_fading<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    -mean * math::ln(open_unit(rng))
}

/// Draws a random scenario.
///
/// All randomness comes from one ChaCha8 stream seeded with `seed`, consumed in
/// this order: user, server and service counts; the catalog (`cycles_per_bit`,
/// `storage_demand` per function); servers (`cpu`, `storage` per server);
/// services (length, distinct functions by partial Fisher-Yates, deadline,
/// rate floor); users (service, distance); fading (row-major `U x K`).
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<NetworkScenario, Error> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let num_users = uniform_int(&mut rng, config.users);
    let num_servers = uniform_int(&mut rng, config.servers);
    let num_services = uniform_int(&mut rng, config.services);

    let nf_catalog: Vec<NetworkFunction> = (1..=config.num_functions as u32)
        .map(|id| NetworkFunction {
            id,
            cycles_per_bit: uniform(&mut rng, config.cycles_per_bit),
            storage_demand: uniform(&mut rng, config.nf_storage),
        })
        .collect();

    let servers: Vec<Server> = (1..=num_servers as u32)
        .map(|id| Server {
            id,
            cpu_capacity: uniform(&mut rng, config.cpu_capacity),
            storage_capacity: uniform(&mut rng, config.storage_capacity),
        })
        .collect();

    let services: Vec<ServiceChain> = (1..=num_services as u32)
        .map(|id| {
            let len = uniform_int(&mut rng, config.nfs_per_service);
            let mut pool: Vec<u32> = (1..=config.num_functions as u32).collect();
            for i in 0..len {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            pool.truncate(len);
            ServiceChain {
                id,
                source_node: 0,
                destination_node: 1,
                functions: pool,
                deadline_s: uniform(&mut rng, config.deadline),
                min_rate: uniform(&mut rng, config.min_rate),
            }
        })
        .collect();

    let users: Vec<UserRequest> = (1..=num_users as u32)
        .map(|id| {
            let service = rng.random_range(1..=num_services as u32);
            // area-uniform drop in the disk
            let distance_m = config.cell_radius_m * math::sqrt(open_unit(&mut rng));
            let floor = services[service as usize - 1].min_rate;
            UserRequest {
                id,
                service,
                distance_m,
                packet_size_bits: floor * config.packet_bits_per_rate,
            }
        })
        .collect();

    let k = config.num_subcarriers;
    let mut gains = Vec::with_capacity(num_users);
    for user in &users {
        let row: Vec<f64> = (0..k)
            .map(|_| {
                let fading = sample_fading(&mut rng, config.fading_mean);
                channel_gain(user.distance_m, fading, config.pathloss_exp)
                    .expect("distance drawn from the open unit disk")
            })
            .collect();
        gains.push(row);
    }

    Ok(NetworkScenario {
        users,
        servers,
        services,
        nf_catalog,
        channel_gain: gains,
        noise_power: vec![vec![config.noise_w; k]; num_users],
        num_subcarriers: k,
        subcarrier_bandwidth_khz: config.subcarrier_bandwidth_khz,
        max_power_w: config.max_power_w,
        rng_seed: seed,
    })
}

/// Checks every type invariant; an empty result means the scenario is well formed.
pub fn validate_scenario(s: &NetworkScenario) -> Vec<String> {
    let mut out = Vec::new();
    let u = s.users.len();
    let k = s.num_subcarriers;

    if k == 0 {
        out.push("num_subcarriers: must be >= 1".into());
    }
    if !(s.max_power_w > 0.0) {
        out.push(format!("max_power_w: must be > 0, got {}", s.max_power_w));
    }
    if !(s.subcarrier_bandwidth_khz > 0.0) {
        out.push(format!("subcarrier_bandwidth_khz: must be > 0, got {}", s.subcarrier_bandwidth_khz));
    }
    for (name, m) in [("channel_gain", &s.channel_gain), ("noise_power", &s.noise_power)] {
        if m.len() != u || m.iter().any(|row| row.len() != k) {
            out.push(format!("{name}: expected {u}x{k} matrix"));
            continue;
        }
        for (ui, row) in m.iter().enumerate() {
            for (ki, &v) in row.iter().enumerate() {
                if !(v > 0.0) {
                    out.push(format!("{name}[{ui}][{ki}]: must be > 0, got {v}"));
                }
            }
        }
    }
    for f in &s.nf_catalog {
        if !(f.cycles_per_bit > 0.0) {
            out.push(format!("nf_catalog[{}].cycles_per_bit: must be > 0", f.id));
        }
        if !(f.storage_demand >= 0.0) {
            out.push(format!("nf_catalog[{}].storage_demand: must be >= 0", f.id));
        }
    }
    for sv in &s.servers {
        if !(sv.cpu_capacity > 0.0) {
            out.push(format!("servers[{}].cpu_capacity: must be > 0", sv.id));
        }
        if !(sv.storage_capacity > 0.0) {
            out.push(format!("servers[{}].storage_capacity: must be > 0", sv.id));
        }
    }
    for c in &s.services {
        if c.functions.is_empty() {
            out.push(format!("services[{}].functions: must be non-empty", c.id));
        }
        if !(c.deadline_s > 0.0) {
            out.push(format!("services[{}].deadline_s: must be > 0", c.id));
        }
        if !(c.min_rate >= 0.0) {
            out.push(format!("services[{}].min_rate: must be >= 0", c.id));
        }
        for f in &c.functions {
            if s.function(*f).is_none() {
                out.push(format!("services[{}].functions: unknown function {f}", c.id));
            }
        }
    }
    for user in &s.users {
        if s.service(user.service).is_none() {
            out.push(format!("users[{}].service: unknown service {}", user.id, user.service));
        }
        if !(user.distance_m > 0.0) {
            out.push(format!("users[{}].distance_m: must be > 0", user.id));
        }
        if !(user.packet_size_bits >= 0.0) {
            out.push(format!("users[{}].packet_size_bits: must be >= 0", user.id));
        }
    }
    out
}
