#include "uhr/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <opencv2/imgcodecs.hpp>

#include "httplib.h"
#include "json.hpp"

#include "uhr/hashing.hpp"
#include "uhr/rle.hpp"

namespace uhr {

std::uint64_t request_fingerprint(const BackendRequest& request) {
    std::uint64_t h = fnv1a(request.prompt);
    h = mix_seed(h, request.images.size());
    for (const ImageCanvas& img : request.images) {
        h = mix_seed(h, (static_cast<std::uint64_t>(img.width()) << 32) |
                            static_cast<std::uint32_t>(img.height()));
    }
    return h;
}

void ScriptedBackend::add_reply(std::uint64_t fingerprint, std::string reply) {
    std::lock_guard<std::mutex> lock(mu_);
    by_fingerprint_[fingerprint] = std::move(reply);
}

void ScriptedBackend::add_stage_reply(PromptStage stage, std::string reply) {
    std::lock_guard<std::mutex> lock(mu_);
    by_stage_[stage] = std::move(reply);
}

std::string ScriptedBackend::complete(const BackendRequest& request) {
    if (request.images.empty()) throw TransportError("request carries no image");
    const std::uint64_t fp = request_fingerprint(request);
    const PromptStage stage = classify_stage(request.prompt);
    std::lock_guard<std::mutex> lock(mu_);
    std::string reply;
    if (const auto it = by_fingerprint_.find(fp); it != by_fingerprint_.end()) {
        reply = it->second;
    } else if (const auto st = by_stage_.find(stage); st != by_stage_.end()) {
        reply = st->second;
    } else {
        throw TransportError("unscripted request (stage " + stage_name(stage) +
                             ", fingerprint " + std::to_string(fp) + ")");
    }
    transcript_.push_back(Entry{fp, stage, request.prompt, reply});
    return reply;
}

std::vector<ScriptedBackend::Entry> ScriptedBackend::transcript() const {
    std::lock_guard<std::mutex> lock(mu_);
    return transcript_;
}

void ScriptedBackend::clear_transcript() {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.clear();
}

std::string base64_encode(const unsigned char* data, std::size_t len) {
    static constexpr char table[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.push_back(table[(v >> 6) & 63]);
        out.push_back(table[v & 63]);
    }
    if (i + 1 == len) {
        const unsigned v = data[i] << 16;
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.append("==");
    } else if (i + 2 == len) {
        const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.push_back(table[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string encode_png_base64(const ImageCanvas& image) {
    if (image.empty()) throw TransportError("cannot encode an empty image");
    std::vector<unsigned char> bytes;
    if (!cv::imencode(".png", image.mat, bytes))
        throw TransportError("PNG encoding failed");
    return base64_encode(bytes.data(), bytes.size());
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw TransportError("backend base URL is empty");
    if (config_.attempts < 1) throw TransportError("attempt budget must be positive");
}

std::string HttpBackend::complete(const BackendRequest& request) {
    if (request.images.empty()) throw TransportError("request carries no image");

    nlohmann::ordered_json content = nlohmann::ordered_json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    for (const ImageCanvas& img : request.images) {
        content.push_back(
            {{"type", "image_url"},
             {"image_url", {{"url", "data:image/png;base64," + encode_png_base64(img)}}}});
    }
    nlohmann::ordered_json body = {
        {"model", config_.model},
        {"temperature", request.temperature},
        {"top_p", request.top_p},
        {"messages",
         nlohmann::ordered_json::array(
             {{{"role", "user"}, {"content", std::move(content)}}})},
    };
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.auth_env.c_str());
        token != nullptr && token[0] != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    int backoff = config_.backoff_ms;
    for (int attempt = 0; attempt < config_.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_s, 0);
        client.set_read_timeout(config_.timeout_s, 0);
        client.set_write_timeout(config_.timeout_s, 0);
        auto res = client.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_error = "no response: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        try {
            const auto parsed = nlohmann::ordered_json::parse(res->body);
            return parsed.at("choices").at(0).at("message").at("content")
                .get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("malformed reply body: ") + e.what();
        }
    }
    throw TransportError("backend call failed after " +
                         std::to_string(config_.attempts) + " attempts (" +
                         last_error + ")");
}

std::string BoxFillSegmenter::segment(const ImageCanvas& image, const GeomBox& box) {
    return rle_compress(box_fill_mask(box, image.height(), image.width()));
}

HttpSegmenter::HttpSegmenter(std::string base_url, std::string path, int timeout_s)
    : base_url_(std::move(base_url)), path_(std::move(path)), timeout_s_(timeout_s) {
    if (base_url_.empty()) throw TransportError("segmenter base URL is empty");
}

std::string HttpSegmenter::segment(const ImageCanvas& image, const GeomBox& box) {
    nlohmann::ordered_json body = {
        {"image", encode_png_base64(image)},
        {"box", box.coords},
        {"width", image.width()},
        {"height", image.height()},
    };
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) throw TransportError("segmenter unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("segmenter status " + std::to_string(res->status));
    try {
        return nlohmann::ordered_json::parse(res->body).at("rle").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed segmenter reply: ") + e.what());
    }
}

}  // namespace uhr
