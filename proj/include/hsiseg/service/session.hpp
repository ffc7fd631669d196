#pragma once

#include <hsiseg/io/png.hpp>
#include <hsiseg/io/raster.hpp>
#include <hsiseg/pipeline.hpp>
#include <hsiseg/pseudo_rgb.hpp>
#include <hsiseg/rng.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hsiseg::service {

using Clock = std::chrono::steady_clock;

/// Immutable view of a session's click history. Readers hold a shared_ptr and
/// compute against it without locking.
struct Snapshot {
  ClickSet clicks;
  std::uint64_t state_hash = 0;
};

inline std::string serialize_clicks(const ClickSet& clicks) {
  std::string key;
  for (const auto& c : clicks) {
    key += std::to_string(c.row) + ',' + std::to_string(c.col) + (c.polarity == Polarity::positive ? '+' : '-');
    key += ';';
  }
  return key;
}

inline std::uint64_t state_hash(const ClickSet& clicks) { return RandomStream::fnv1a(serialize_clicks(clicks)); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct MapStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

inline MapStats map_stats(const SimilarityMap& map) {
  MapStats s{1.0, 0.0, 0.0};
  for (float v : map.data()) {
    s.min = std::min(s.min, double(v));
    s.max = std::max(s.max, double(v));
    s.mean += v;
  }
  s.mean /= double(map.size());
  return s;
}

/// Map threshold on the 16-bit transport grid: mask = q(v) >= round(t * 65535).
inline std::uint32_t quantized_threshold(double t) {
  if (!std::isfinite(t)) fail(Errc::invalid_argument, "threshold must be finite");
  const double q = std::round(std::clamp(t, 0.0, 1.0) * 65535.0);
  return t > 1.0 ? 65536u : static_cast<std::uint32_t>(q);
}

inline std::vector<std::uint8_t> encode_mask_png(const SimilarityMap& map, double t) {
  const auto cut = quantized_threshold(t);
  png::Image img{map.width(), map.height(), 1, 1, std::vector<std::uint16_t>(map.size())};
  for (std::size_t i = 0; i < map.size(); ++i) img.samples[i] = io::quantize16(map[i]) >= cut ? 1 : 0;
  return png::encode(img);
}

struct MapPayload {
  std::vector<std::uint8_t> body;
  std::string content_type;
  MapStats stats;
  std::uint64_t state_hash = 0;
  std::size_t clicks = 0;
};

enum class MapFormat { png16, mask, raw };

struct SessionSource {
  HyperCube cube;
  std::optional<SimilarityMap> external_rgb;
  std::string origin;  // path or "scene"
};

class Session {
 public:
  Session(std::string id, SessionSource source, PipelineConfig config)
      : id_(std::move(id)),
        cube_(std::move(source.cube)),
        external_rgb_(std::move(source.external_rgb)),
        origin_(std::move(source.origin)),
        config_(std::move(config)),
        rgb_(pseudo_rgb(cube_, config_.bands)),
        rgb_png_(io::encode_rgb_png(rgb_)),
        snapshot_(std::make_shared<const Snapshot>(Snapshot{{}, state_hash({})})) {
    if (external_rgb_) require_same_shape(*external_rgb_, cube_, "external rgb map");
  }

  const std::string& id() const noexcept { return id_; }
  const HyperCube& cube() const noexcept { return cube_; }
  const RgbImage& rgb() const noexcept { return rgb_; }
  const std::vector<std::uint8_t>& rgb_png() const noexcept { return rgb_png_; }
  const std::string& origin() const noexcept { return origin_; }
  bool has_external_rgb() const noexcept { return external_rgb_.has_value(); }

  std::vector<Method> methods() const {
    std::vector<Method> out;
    for (auto m : kAllMethods)
      if (m != Method::learned || config_.model) out.push_back(m);
    return out;
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

  std::shared_ptr<const Snapshot> add_click(const Click& click) {
    std::lock_guard lock(mutation_mutex_);
    ClickSet next = snapshot()->clicks;
    ClickSet single{click};
    single.check_bounds(cube_.height(), cube_.width());
    next.add(click);
    return publish(std::move(next));
  }

  std::shared_ptr<const Snapshot> undo_click() {
    std::lock_guard lock(mutation_mutex_);
    ClickSet next = snapshot()->clicks;
    next.pop_back();
    return publish(std::move(next));
  }

  /// Map payload for the current snapshot; identical requests against the
  /// same click history return the same cached bytes.
  std::shared_ptr<const MapPayload> get_map(Method method, MapFormat format, double threshold = 0.5) const {
    if (method == Method::learned && !config_.model)
      fail(Errc::not_found, "method 'learned' is unavailable: no fusion model loaded");
    const auto snap = snapshot();
    if (snap->clicks.positive_count() == 0) fail(Errc::conflict, "session has no positive clicks");

    std::string key = serialize_clicks(snap->clicks) + '|' + std::string(to_string(method)) + '|';
    if (format == MapFormat::png16) key += "png";
    else if (format == MapFormat::raw) key += "raw";
    else key += "mask" + std::to_string(quantized_threshold(threshold));
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }

    const SceneView scene{cube_, &rgb_, external_rgb_ ? &*external_rgb_ : nullptr};
    const auto map = compute_map(method, scene, snap->clicks, config_);
    auto payload = std::make_shared<MapPayload>();
    payload->stats = map_stats(map);
    payload->state_hash = snap->state_hash;
    payload->clicks = snap->clicks.size();
    switch (format) {
      case MapFormat::png16:
        payload->body = io::encode_map_png16(map);
        payload->content_type = "image/png";
        break;
      case MapFormat::mask:
        payload->body = encode_mask_png(map, threshold);
        payload->content_type = "image/png";
        break;
      case MapFormat::raw:
        payload->body = io::encode_smap(map);
        payload->content_type = "application/octet-stream";
        break;
    }

    std::lock_guard lock(cache_mutex_);
    // Entries for an older history are unreachable once a mutation lands.
    if (snapshot() != snap) return payload;
    if (cache_.size() >= kMaxCacheEntries) cache_.clear();
    return cache_.emplace(key, std::move(payload)).first->second;
  }

  std::size_t cache_size() const {
    std::lock_guard lock(cache_mutex_);
    return cache_.size();
  }

 private:
  static constexpr std::size_t kMaxCacheEntries = 64;

  std::shared_ptr<const Snapshot> publish(ClickSet clicks) {
    auto snap = std::make_shared<const Snapshot>(Snapshot{clicks, state_hash(clicks)});
    {
      std::lock_guard lock(cache_mutex_);
      cache_.clear();
      std::lock_guard slock(snapshot_mutex_);
      snapshot_ = snap;
    }
    return snap;
  }

  std::string id_;
  HyperCube cube_;
  std::optional<SimilarityMap> external_rgb_;
  std::string origin_;
  PipelineConfig config_;
  RgbImage rgb_;
  std::vector<std::uint8_t> rgb_png_;

  std::mutex mutation_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, std::shared_ptr<const MapPayload>> cache_;
};

/// In-memory registry with idle eviction.
class SessionStore {
 public:
  using Now = std::function<Clock::time_point()>;

  explicit SessionStore(PipelineConfig config = {}, std::chrono::seconds idle_timeout = std::chrono::minutes(30),
                        Now now = [] { return Clock::now(); })
      : config_(std::move(config)), idle_timeout_(idle_timeout), now_(std::move(now)) {
    std::random_device rd;
    token_seed_ = (std::uint64_t{rd()} << 32) ^ rd();
  }

  std::shared_ptr<Session> create(SessionSource source) {
    evict_idle();
    std::string id;
    {
      std::lock_guard lock(mutex_);
      RandomStream rng(token_seed_ + counter_++, "session.id");
      id = hex64(rng.next_u64()) + hex64(rng.next_u64());
    }
    auto session = std::make_shared<Session>(id, std::move(source), config_);
    std::lock_guard lock(mutex_);
    sessions_.emplace(id, session);
    last_seen_[id] = now_();
    return session;
  }

  std::shared_ptr<Session> find(const std::string& id) {
    evict_idle();
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(Errc::not_found, "unknown session '" + id + "'");
    last_seen_[id] = now_();
    return it->second;
  }

  bool erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    last_seen_.erase(id);
    return sessions_.erase(id) > 0;
  }

  std::size_t evict_idle() {
    const auto now = now_();
    std::lock_guard lock(mutex_);
    std::size_t removed = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - last_seen_.at(it->first) > idle_timeout_) {
        last_seen_.erase(it->first);
        it = sessions_.erase(it);
        ++removed;
      } else {
        ++it;
      }
    }
    return removed;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

  const PipelineConfig& config() const noexcept { return config_; }

 private:
  PipelineConfig config_;
  std::chrono::seconds idle_timeout_;
  Now now_;
  std::uint64_t token_seed_ = 0;
  std::uint64_t counter_ = 0;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, Clock::time_point> last_seen_;
};

}  // namespace hsiseg::service
