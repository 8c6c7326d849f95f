#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <bsldm/bsldm.h>

namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("bsldm_capi_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string get_key(bsldm_config* cfg, const char* key) {
    char buf[256];
    REQUIRE(bsldm_config_get(cfg, key, buf, sizeof(buf)) == BSLDM_OK);
    return buf;
}

}  // namespace

TEST_CASE("version and error strings are always available") {
    CHECK(std::strcmp(bsldm_version(), "0.1.0") == 0);
    CHECK(bsldm_last_error() != nullptr);  // empty string before any failure
}

TEST_CASE("config handles expose get, set, dump, and save") {
    bsldm_config* cfg = bsldm_config_new();
    REQUIRE(cfg != nullptr);

    CHECK(get_key(cfg, "schedule.T") == "1000");
    CHECK(get_key(cfg, "sampler.omega") == "0.003");
    CHECK(get_key(cfg, "sampler.threshold") == "temporal");

    CHECK(bsldm_config_set(cfg, "schedule.T", "250") == BSLDM_OK);
    CHECK(get_key(cfg, "schedule.T") == "250");

    SUBCASE("unknown keys are rejected with a message") {
        CHECK(bsldm_config_set(cfg, "schedule.bogus", "1") == BSLDM_E_INVALID_ARGUMENT);
        CHECK(std::strlen(bsldm_last_error()) > 0);
        char buf[8];
        CHECK(bsldm_config_get(cfg, "no.such.key", buf, sizeof(buf)) == BSLDM_E_INVALID_ARGUMENT);
    }
    SUBCASE("short buffers are reported, not truncated silently") {
        char tiny[2];
        CHECK(bsldm_config_get(cfg, "sampler.threshold", tiny, sizeof(tiny)) ==
              BSLDM_E_INVALID_ARGUMENT);
    }
    SUBCASE("profiles rewrite the geometry") {
        CHECK(bsldm_config_apply_profile(cfg, "desk") == BSLDM_OK);
        CHECK(get_key(cfg, "data.image_size") == "64");
        CHECK(bsldm_config_apply_profile(cfg, "nope") == BSLDM_E_INVALID_ARGUMENT);
    }
    SUBCASE("dump produces parseable ini text") {
        char big[16384];
        CHECK(bsldm_config_dump(cfg, big, sizeof(big)) == BSLDM_OK);
        CHECK(std::string(big).find("[schedule]") != std::string::npos);
        CHECK(std::string(big).find("T = 250") != std::string::npos);
    }
    SUBCASE("save then load round trips") {
        std::string dir = fresh_dir("cfg");
        std::string path = dir + "/exp.ini";
        CHECK(bsldm_config_save(cfg, path.c_str()) == BSLDM_OK);
        bsldm_config* back = bsldm_config_load(path.c_str());
        REQUIRE(back != nullptr);
        CHECK(get_key(back, "schedule.T") == "250");
        bsldm_config_free(back);
        CHECK(bsldm_config_load((dir + "/missing.ini").c_str()) == nullptr);
        CHECK(std::strlen(bsldm_last_error()) > 0);
    }

    bsldm_config_free(cfg);
    bsldm_config_free(nullptr);  // must be a safe no-op
}

TEST_CASE("null arguments fail cleanly instead of crashing") {
    CHECK(bsldm_config_set(nullptr, "a", "b") == BSLDM_E_INVALID_ARGUMENT);
    bsldm_config* cfg = bsldm_config_new();
    CHECK(bsldm_config_set(cfg, nullptr, "b") == BSLDM_E_INVALID_ARGUMENT);
    CHECK(bsldm_config_set(cfg, "schedule.T", nullptr) == BSLDM_E_INVALID_ARGUMENT);
    CHECK(bsldm_config_get(cfg, "schedule.T", nullptr, 16) == BSLDM_E_INVALID_ARGUMENT);
    CHECK(bsldm_prepare(nullptr, 0) == BSLDM_E_INVALID_ARGUMENT);
    CHECK(bsldm_train(cfg, nullptr) == BSLDM_E_INVALID_ARGUMENT);
    bsldm_config_free(cfg);
}

TEST_CASE("prepare and evaluate run end to end through the c api") {
    std::string root = fresh_dir("run");
    bsldm_config* cfg = bsldm_config_new();
    REQUIRE(bsldm_config_apply_profile(cfg, "desk") == BSLDM_OK);
    REQUIRE(bsldm_config_set(cfg, "run.output_root", root.c_str()) == BSLDM_OK);
    REQUIRE(bsldm_config_set(cfg, "run.seed", "31") == BSLDM_OK);
    REQUIRE(bsldm_config_set(cfg, "data.synthetic_n", "10") == BSLDM_OK);
    REQUIRE(bsldm_config_set(cfg, "data.image_size", "16") == BSLDM_OK);

    CHECK(bsldm_prepare(cfg, 0) == BSLDM_OK);
    CHECK(fs::exists(root + "/data/manifest.csv"));

    // training stages fail on preconditions, not crashes
    CHECK(bsldm_train(cfg, "bogus") == BSLDM_E_INVALID_ARGUMENT);
    CHECK(bsldm_sample(cfg, 0) == BSLDM_E_PRECONDITION);
    CHECK(std::strlen(bsldm_last_error()) > 0);

    // score hand-built perfect predictions without any training
    std::string preds = root + "/preds";
    fs::create_directories(preds);
    std::ifstream mf(root + "/data/manifest.csv");
    std::string line;
    std::getline(mf, line);  // header
    while (std::getline(mf, line)) {
        if (line.find(",test,") == std::string::npos) continue;
        std::string id = line.substr(0, line.find(','));
        fs::copy_file(root + "/data/tissue/" + id + ".png", preds + "/" + id + ".png");
    }
    CHECK(bsldm_evaluate(cfg, preds.c_str()) == BSLDM_OK);
    CHECK(fs::exists(root + "/reports/eval-preds.json"));

    CHECK(bsldm_evaluate(cfg, (root + "/empty").c_str()) != BSLDM_OK);
    bsldm_config_free(cfg);
}
