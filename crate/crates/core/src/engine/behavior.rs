/// Behaviors known to the engine. Each one only modifies the agent it is attached to.
#[derive(Clone, Debug, PartialEq)]
pub enum Behavior {
    /// Grow by `growth_rate` volume per step until `target_diameter`, then divide.
    GrowDivide { growth_rate: f64, target_diameter: f64, volume_ratio: f64 },
    /// Susceptible persons become infected with `probability` if an infected person is within `radius`.
    Infection { radius: f64, probability: f64 },
    Recovery { probability: f64 },
    /// Random unit direction scaled by `speed`.
    RandomMovement { speed: f64 },
    Secretion { substance: u16, quantity: f64 },
    /// Move along the normalized gradient of `substance`, scaled by `weight`.
    Chemotaxis { substance: u16, weight: f64 },
    TumorGrowth {
        growth_rate: f64,
        max_diameter: f64,
        division_probability: f64,
        death_probability: f64,
        min_age: u32,
        displacement_rate: f64,
    },
}

impl Behavior {
    pub const GROW_DIVIDE_TAG: u32 = 0x101;
    pub const INFECTION_TAG: u32 = 0x102;
    pub const RECOVERY_TAG: u32 = 0x103;
    pub const RANDOM_MOVEMENT_TAG: u32 = 0x104;
    pub const SECRETION_TAG: u32 = 0x105;
    pub const CHEMOTAXIS_TAG: u32 = 0x106;
    pub const TUMOR_GROWTH_TAG: u32 = 0x107;

    pub fn tag(&self) -> u32 {
        match self {
            Behavior::GrowDivide { .. } => Self::GROW_DIVIDE_TAG,
            Behavior::Infection { .. } => Self::INFECTION_TAG,
            Behavior::Recovery { .. } => Self::RECOVERY_TAG,
            Behavior::RandomMovement { .. } => Self::RANDOM_MOVEMENT_TAG,
            Behavior::Secretion { .. } => Self::SECRETION_TAG,
            Behavior::Chemotaxis { .. } => Self::CHEMOTAXIS_TAG,
            Behavior::TumorGrowth { .. } => Self::TUMOR_GROWTH_TAG,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Behavior::GrowDivide { .. } => "grow-divide",
            Behavior::Infection { .. } => "infection",
            Behavior::Recovery { .. } => "recovery",
            Behavior::RandomMovement { .. } => "random-movement",
            Behavior::Secretion { .. } => "secretion",
            Behavior::Chemotaxis { .. } => "chemotaxis",
            Behavior::TumorGrowth { .. } => "tumor-growth",
        }
    }

    /// True if the behavior reads other agents' state.
    pub fn reads_neighbors(&self) -> bool {
        matches!(self, Behavior::Infection { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorInstance {
    pub behavior: Behavior,
    pub copy_on_division: bool,
    pub remove_on_division: bool,
}

impl BehaviorInstance {
    /// Copied to daughters, kept by the mother.
    pub fn new(behavior: Behavior) -> Self {
        Self { behavior, copy_on_division: true, remove_on_division: false }
    }
}
