#pragma once

#include "adaloc/keying.hpp"
#include "adaloc/network.hpp"

namespace adaloc {

// Locked artifact: key-indexed coordinates zeroed, everything else equal to
// the source model. fingerprint identifies the locked bytes; source_hash and
// key_indices_hash bind it to the key lineage that unlocks it.
struct LockedModel {
    ParameterStore params;
    Hash32 fingerprint{};
    Hash32 source_hash{};
    Hash32 key_indices_hash{};
};

Hash32 hash_of_indices(const std::vector<size_t>& indices);

// Phi: zeroize key coordinates. Accepts an already-locked store (idempotent).
LockedModel lock(const ParameterStore& params, const Key& key);

// Psi: restore key values. unlock(lock(theta, kappa), kappa) == theta exactly.
ParameterStore unlock(const LockedModel& locked, const Key& key);

// f^0: all weights zero, biases zero except the final layer's.
ParameterStore reference_model(const ParameterStore& params);

// New key with the same index set and values read from the adapted store;
// errors if any coordinate outside the key drifted.
Key refresh_key(const ParameterStore& adapted, const Key& old_key);

}  // namespace adaloc
