#ifndef XQMAP_PERSISTENCE_HPP_
#define XQMAP_PERSISTENCE_HPP_

#include <string>

#include <nlohmann/json.hpp>

#include "xqmap/qmap.hpp"
#include "xqmap/trainer.hpp"

namespace xqmap {

inline constexpr int kCheckpointFormatVersion = 1;

// {"manifest": {...}, "payload": [base64 little-endian float64 per array]}
nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
// FormatError on a version mismatch or a payload that disagrees with the manifest.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Per-component row-major grids plus the weighted composite and its argmax.
nlohmann::json qmaps_to_json(const QMapSet& q, Primitive primitive);
QMapSet qmaps_from_json(const nlohmann::json& j);

nlohmann::json action_to_json(const Action& a);
nlohmann::json reward_to_json(const RewardVector& r);
nlohmann::json step_outcome_to_json(const Action& action, const StepOutcome& out);

// Canonical text form: sorted keys, shortest round-trip floats, trailing newline.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace xqmap

#endif  // XQMAP_PERSISTENCE_HPP_
