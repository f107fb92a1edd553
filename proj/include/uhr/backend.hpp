#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/coord.hpp"
#include "uhr/geometry.hpp"
#include "uhr/image.hpp"
#include "uhr/prompts.hpp"

namespace uhr {

/// Raised when a model or segmenter call cannot complete. Callers mark the
/// affected sample EMPTY rather than aborting the run.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One model call. cv::Mat copies share pixel storage, so requests stay
/// cheap to pass around.
struct BackendRequest {
    std::vector<ImageCanvas> images;  // at least one
    std::string prompt;
    double temperature = 0.0;
    double top_p = 1.0;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    /// Reply text for the request; throws TransportError on failure.
    /// Implementations must tolerate concurrent calls.
    virtual std::string complete(const BackendRequest& request) = 0;

    virtual int max_images() const { return 4; }

    /// Native coordinate convention, when the backend defines one. Set, it
    /// wins over the run configuration.
    virtual std::optional<CoordConvention> convention_override() const {
        return std::nullopt;
    }

    /// True for network transports. In-process doubles stay false so their
    /// recorded latency is pinned to zero and replays stay byte-stable.
    virtual bool remote() const { return false; }
};

/// Stable content key: FNV-1a over the prompt text mixed with the count and
/// dimensions of the attached images. Canned replies and transcript replays
/// are keyed by it.
std::uint64_t request_fingerprint(const BackendRequest& request);

/// Adapts a callable; the callable carries any state it needs.
class FnBackend : public ModelBackend {
public:
    using Fn = std::function<std::string(const BackendRequest&)>;
    explicit FnBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const BackendRequest& request) override { return fn_(request); }

private:
    Fn fn_;
};

/// Deterministic test double: replies come from an exact-fingerprint script
/// first, then from a per-stage fallback. An uncovered request throws
/// TransportError so tests fail loudly. Shareable across workers; the
/// transcript appends under a lock.
class ScriptedBackend : public ModelBackend {
public:
    struct Entry {
        std::uint64_t fingerprint = 0;
        PromptStage stage = PromptStage::kUnknown;
        std::string prompt;
        std::string reply;
    };

    void add_reply(std::uint64_t fingerprint, std::string reply);
    void add_stage_reply(PromptStage stage, std::string reply);

    std::string complete(const BackendRequest& request) override;

    std::vector<Entry> transcript() const;
    void clear_transcript();

private:
    mutable std::mutex mu_;
    std::map<std::uint64_t, std::string> by_fingerprint_;
    std::map<PromptStage, std::string> by_stage_;
    std::vector<Entry> transcript_;
};

struct HttpBackendConfig {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string auth_env = "UHR_API_TOKEN";  // bearer token variable name
    int attempts = 3;
    int backoff_ms = 500;  // doubles after each failed attempt
    int timeout_s = 120;
    std::optional<CoordConvention> native_convention;
};

/// Chat-style remote endpoint. Images travel as base-64 PNG data URLs in the
/// message content; the reply is the first choice's message text. Failures
/// retry with exponential backoff before raising TransportError.
class HttpBackend : public ModelBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string complete(const BackendRequest& request) override;
    std::optional<CoordConvention> convention_override() const override {
        return config_.native_convention;
    }
    bool remote() const override { return true; }

private:
    HttpBackendConfig config_;
};

std::string base64_encode(const unsigned char* data, std::size_t len);
std::string encode_png_base64(const ImageCanvas& image);

/// Box-prompted mask producer; the return value is compressed run-length
/// text for the full image canvas.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual std::string segment(const ImageCanvas& image, const GeomBox& box) = 0;
};

/// Built-in stub: the mask is the filled box interior.
class BoxFillSegmenter : public Segmenter {
public:
    std::string segment(const ImageCanvas& image, const GeomBox& box) override;
};

/// Remote box-prompt service: POST JSON {image, box, width, height}, reply
/// JSON {rle}. No retries; a segmentation failure only voids one sample.
class HttpSegmenter : public Segmenter {
public:
    explicit HttpSegmenter(std::string base_url, std::string path = "/segment",
                           int timeout_s = 120);
    std::string segment(const ImageCanvas& image, const GeomBox& box) override;

private:
    std::string base_url_;
    std::string path_;
    int timeout_s_;
};

}  // namespace uhr
