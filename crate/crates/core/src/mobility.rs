//! Random waypoint mobility, evaluated lazily at query times.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{distance, AreaBounds, Position};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub v_min: f64,
    pub v_max: f64,
    pub pause_time: f64,
    pub area: AreaBounds,
}

impl MobilityParams {
    pub fn new(v_min: f64, v_max: f64, pause_time: f64, area: AreaBounds) -> Result<Self> {
        if !(v_min.is_finite() && v_min >= 0.0) {
            return Err(Error::param("v_min", format!("must be >= 0, got {v_min}")));
        }
        if !(v_max.is_finite() && v_max >= v_min) {
            return Err(Error::param(
                "v_max",
                format!("must be >= v_min ({v_min}), got {v_max}"),
            ));
        }
        if !(pause_time.is_finite() && pause_time >= 0.0) {
            return Err(Error::param("pause_time", format!("must be >= 0, got {pause_time}")));
        }
        Ok(MobilityParams {
            v_min,
            v_max,
            pause_time,
            area,
        })
    }

    /// Nodes never move.
    pub fn fixed(area: AreaBounds) -> Self {
        MobilityParams {
            v_min: 0.0,
            v_max: 0.0,
            pause_time: 0.0,
            area,
        }
    }

    pub fn is_static(&self) -> bool {
        self.v_max == 0.0
    }

    fn draw_position(&self, rng: &mut ChaCha8Rng) -> Position {
        Position::new(rng.gen::<f64>() * self.area.width, rng.gen::<f64>() * self.area.height)
    }

    /// Uniform in `[v_min, v_max]`; a zero draw is redrawn.
    fn draw_speed(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.v_min == self.v_max {
            return self.v_max;
        }
        loop {
            let s = rng.gen_range(self.v_min..=self.v_max);
            if s > 0.0 {
                return s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Moving,
    Paused { until: f64 },
}

/// Trajectory state of one node. `current` is the position at `time`.
#[derive(Debug, Clone)]
pub struct WaypointState {
    current: Position,
    target: Position,
    speed: f64,
    phase: Phase,
    time: f64,
    rng: ChaCha8Rng,
}

impl WaypointState {
    /// Initial state at t = 0: uniform position, first leg already started.
    pub fn init(params: &MobilityParams, mut rng: ChaCha8Rng) -> Self {
        let current = params.draw_position(&mut rng);
        let (target, speed) = if params.is_static() {
            (current, 0.0)
        } else {
            (params.draw_position(&mut rng), params.draw_speed(&mut rng))
        };
        WaypointState {
            current,
            target,
            speed,
            phase: Phase::Moving,
            time: 0.0,
            rng,
        }
    }

    /// Initial state at t = 0 from a given position.
    pub fn starting_at(position: Position, params: &MobilityParams, mut rng: ChaCha8Rng) -> Self {
        if params.is_static() {
            return Self::stationary(position, rng);
        }
        let target = params.draw_position(&mut rng);
        let speed = params.draw_speed(&mut rng);
        Self::on_leg(position, target, speed, 0.0, rng)
    }

    /// Node pinned at `position` forever.
    pub fn stationary(position: Position, rng: ChaCha8Rng) -> Self {
        WaypointState {
            current: position,
            target: position,
            speed: 0.0,
            phase: Phase::Moving,
            time: 0.0,
            rng,
        }
    }

    /// State in the middle of a leg from `current` toward `target` at `time`.
    pub fn on_leg(current: Position, target: Position, speed: f64, time: f64, rng: ChaCha8Rng) -> Self {
        WaypointState {
            current,
            target,
            speed,
            phase: Phase::Moving,
            time,
            rng,
        }
    }

    pub fn current(&self) -> Position {
        self.current
    }

    pub fn target(&self) -> Position {
        self.target
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// End of the current pause, or `None` while travelling.
    pub fn pause_until(&self) -> Option<f64> {
        match self.phase {
            Phase::Paused { until } => Some(until),
            Phase::Moving => None,
        }
    }

    fn start_leg(&mut self, params: &MobilityParams) {
        self.target = params.draw_position(&mut self.rng);
        self.speed = params.draw_speed(&mut self.rng);
        self.phase = Phase::Moving;
    }

    /// Advance the trajectory to `t_to` and return the position there.
    /// Queries earlier than the state's own time return the current position.
    pub fn advance(&mut self, params: &MobilityParams, t_to: f64) -> Position {
        while self.time < t_to {
            match self.phase {
                Phase::Paused { until } => {
                    if t_to < until {
                        self.time = t_to;
                    } else {
                        self.time = until;
                        self.start_leg(params);
                    }
                }
                Phase::Moving => {
                    if self.speed <= 0.0 {
                        self.time = t_to;
                        break;
                    }
                    let remaining = distance(self.current, self.target);
                    let arrive = self.time + remaining / self.speed;
                    if arrive > t_to {
                        let frac = (t_to - self.time) / (arrive - self.time);
                        self.current = clamp(self.current.lerp(&self.target, frac), &params.area);
                        self.time = t_to;
                    } else {
                        self.current = self.target;
                        self.time = arrive;
                        self.phase = Phase::Paused {
                            until: arrive + params.pause_time,
                        };
                    }
                }
            }
        }
        self.current
    }
}

fn clamp(p: Position, area: &AreaBounds) -> Position {
    Position::new(p.x.clamp(0.0, area.width), p.y.clamp(0.0, area.height))
}

/// Position at `t_to` of a trajectory known at `t_from`, plus the advanced state.
pub fn position_at(
    state: &WaypointState,
    params: &MobilityParams,
    t_from: f64,
    t_to: f64,
) -> (Position, WaypointState) {
    debug_assert!(t_to >= t_from, "position_at: t_to < t_from");
    debug_assert!(state.time <= t_from + 1e-12);
    let mut next = state.clone();
    next.advance(params, t_from);
    let pos = next.advance(params, t_to);
    (pos, next)
}
