#include "adaloc/locking.hpp"

namespace adaloc {

Hash32 hash_of_indices(const std::vector<size_t>& indices) {
    Sha256 h;
    for (size_t idx : indices) {
        uint8_t bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = uint8_t(uint64_t(idx) >> (8 * b));
        h.update(bytes, 8);
    }
    return h.finish();
}

LockedModel lock(const ParameterStore& params, const Key& key) {
    key.validate();
    const size_t d = params.dim();
    if (key.entries.back().index >= d) throw ValidationError("lock: key index exceeds parameter count");

    ParameterStore locked = params;
    locked.tag = ModelTag::Locked;
    bool changed = false;
    for (const KeyEntry& e : key.entries) {
        if (locked.get_flat(e.index) != 0.0) changed = true;
        locked.set_flat(e.index, 0.0);
    }

    if (content_hash(params) != key.base_model_hash) {
        // Re-locking an already-locked artifact is a no-op and allowed.
        if (changed) throw StaleKeyError("lock: key does not match this model (stale key)");
    }

    LockedModel out;
    out.params = std::move(locked);
    out.fingerprint = content_hash(out.params);
    out.source_hash = key.base_model_hash;
    out.key_indices_hash = hash_of_indices(key.indices());
    return out;
}

ParameterStore unlock(const LockedModel& locked, const Key& key) {
    key.validate();
    if (content_hash(locked.params) != locked.fingerprint)
        throw ValidationError("unlock: locked artifact fingerprint mismatch");
    if (key.base_model_hash != locked.source_hash)
        throw StaleKeyError("unlock: key fingerprint does not match this locked model");
    if (hash_of_indices(key.indices()) != locked.key_indices_hash)
        throw ValidationError("unlock: key index set does not match the lock (partial or tampered key)");

    ParameterStore out = locked.params;
    for (const KeyEntry& e : key.entries) out.set_flat(e.index, e.value);
    out.tag = ModelTag::Pretrained;
    return out;
}

ParameterStore reference_model(const ParameterStore& params) {
    ParameterStore ref = params;
    const size_t L = ref.spec.layers.size();
    for (size_t li = 0; li < L; ++li) {
        std::fill(ref.weights[li].data.begin(), ref.weights[li].data.end(), 0.0);
        if (li + 1 < L) std::fill(ref.biases[li].data.begin(), ref.biases[li].data.end(), 0.0);
    }
    return ref;
}

Key refresh_key(const ParameterStore& adapted, const Key& old_key) {
    old_key.validate();
    // Reconstruct the pre-adaptation model: if the adapted store drifted only
    // at key coordinates, writing the old values back must reproduce exactly
    // the model the key was minted against.
    ParameterStore recon = adapted;
    for (const KeyEntry& e : old_key.entries) recon.set_flat(e.index, e.value);
    recon.tag = ModelTag::Pretrained;
    if (content_hash(recon) != old_key.base_model_hash) {
        throw ValidationError(
            "refresh_key: adapted parameters drifted outside the key (adaptability violation)");
    }
    Key fresh = old_key;
    for (KeyEntry& e : fresh.entries) e.value = adapted.get_flat(e.index);
    return fresh;
}

}  // namespace adaloc
