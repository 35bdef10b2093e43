use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// How many distinct addresses an entity collects non-registrant withdrawals
/// on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectorDegree {
    /// Reuse one of `n` fixed addresses.
    Reuse(u32),
    /// A new address for every withdrawal.
    Fresh,
}

impl Serialize for CollectorDegree {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CollectorDegree::Reuse(n) => serializer.serialize_u32(*n),
            CollectorDegree::Fresh => serializer.serialize_str("fresh"),
        }
    }
}

impl<'de> Deserialize<'de> for CollectorDegree {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u32),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Count(n) => Ok(CollectorDegree::Reuse(n)),
            Raw::Word(w) if w == "fresh" => Ok(CollectorDegree::Fresh),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "collector_degree must be a count or \"fresh\", got {w:?}"
            ))),
        }
    }
}

/// Choice of `maxPriorityFeePerGas` on self-submitted native withdrawals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeeHabit {
    /// Wallet default: a common round value, occasionally with noise.
    Auto,
    /// The same fixed value (wei) for every entity with this profile.
    Manual(u64),
    /// A fixed value unique to each entity.
    Idiosyncratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Burstiness {
    pub window_days: u32,
    /// Fraction of the entity's payments that land inside its window; the
    /// rest are spread over the whole simulated period.
    pub in_window: f64,
}

/// Missing fields in a config file take their [`Default`] values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorProfile {
    pub p_withdraw_to_registrant: f64,
    pub p_self_test_payment: f64,
    pub collector_degree: CollectorDegree,
    pub p_partial_withdraw: f64,
    pub fee_habit: FeeHabit,
    pub burstiness: Burstiness,
}

impl Default for BehaviorProfile {
    fn default() -> Self {
        Self {
            p_withdraw_to_registrant: 0.5,
            p_self_test_payment: 0.02,
            collector_degree: CollectorDegree::Reuse(2),
            p_partial_withdraw: 0.05,
            fee_habit: FeeHabit::Auto,
            burstiness: Burstiness {
                window_days: 30,
                in_window: 0.9,
            },
        }
    }
}

/// A user who never reuses addresses and never withdraws to their
/// registrant address.
pub fn countermeasure_profile() -> BehaviorProfile {
    BehaviorProfile {
        p_withdraw_to_registrant: 0.0,
        p_self_test_payment: 0.0,
        collector_degree: CollectorDegree::Fresh,
        p_partial_withdraw: 0.0,
        fee_habit: FeeHabit::Auto,
        ..BehaviorProfile::default()
    }
}

/// A user who sweeps every payment, in full, to one collection address.
pub fn collector_profile() -> BehaviorProfile {
    BehaviorProfile {
        p_withdraw_to_registrant: 0.0,
        p_self_test_payment: 0.0,
        collector_degree: CollectorDegree::Reuse(1),
        p_partial_withdraw: 0.0,
        fee_habit: FeeHabit::Auto,
        ..BehaviorProfile::default()
    }
}

impl BehaviorProfile {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_withdraw_to_registrant", self.p_withdraw_to_registrant),
            ("p_self_test_payment", self.p_self_test_payment),
            ("p_partial_withdraw", self.p_partial_withdraw),
            ("burstiness.in_window", self.burstiness.in_window),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is not a probability"));
            }
        }
        if self.collector_degree == CollectorDegree::Reuse(0) {
            return Err("collector_degree must be at least 1".into());
        }
        if self.fee_habit == FeeHabit::Manual(0) {
            return Err("manual fee must be positive".into());
        }
        if self.burstiness.window_days == 0 {
            return Err("burstiness.window_days must be at least 1".into());
        }
        Ok(())
    }
}
