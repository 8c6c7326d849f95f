#ifndef BSLDM_H
#define BSLDM_H

/* C interface to the bone-suppression toolkit. All functions return a status
 * code (BSLDM_OK on success); on failure bsldm_last_error() describes what
 * went wrong. The error buffer is thread-local and overwritten by the next
 * failing call on the same thread. */

#ifdef __cplusplus
extern "C" {
#endif

enum {
    BSLDM_OK = 0,
    BSLDM_E_INVALID_ARGUMENT = 1,
    BSLDM_E_IO = 2,
    BSLDM_E_PRECONDITION = 3,
    BSLDM_E_NUMERIC = 4,
    BSLDM_E_INTERNAL = 5
};

typedef struct bsldm_config bsldm_config;

const char* bsldm_version(void);
const char* bsldm_last_error(void);

/* Configs hold every pipeline constant; unset keys keep their defaults.
 * Keys are dotted "section.key" names matching the INI file layout. */
bsldm_config* bsldm_config_new(void);
bsldm_config* bsldm_config_load(const char* path); /* NULL on error */
void bsldm_config_free(bsldm_config* cfg);

int bsldm_config_apply_profile(bsldm_config* cfg, const char* name);
int bsldm_config_set(bsldm_config* cfg, const char* dotted_key, const char* value);
int bsldm_config_get(const bsldm_config* cfg, const char* dotted_key, char* buf,
                     unsigned long buf_len);
int bsldm_config_save(const bsldm_config* cfg, const char* path);
/* Full effective configuration as INI text, truncated to buf_len. */
int bsldm_config_dump(const bsldm_config* cfg, char* buf, unsigned long buf_len);

/* Pipeline commands. Artifacts land under the configured output root
 * (run.output_root, overridable with the BSLDM_OUTPUT_ROOT env var). */
int bsldm_prepare(const bsldm_config* cfg, int force);
int bsldm_train(const bsldm_config* cfg, const char* stage); /* "vqgan" | "ldm" */
int bsldm_sample(const bsldm_config* cfg, int trace);
int bsldm_evaluate(const bsldm_config* cfg, const char* samples_dir); /* NULL = default */
int bsldm_ablate(const bsldm_config* cfg);
int bsldm_psd(const bsldm_config* cfg);

#ifdef __cplusplus
}
#endif

#endif /* BSLDM_H */
