#ifndef SPEKE_LAB_H
#define SPEKE_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Size of a key or key digest.
 */
#define SPEKE_KEY_LEN 32

typedef enum SpekeAttack {
  SPEKE_ATTACK_IMPERSONATION = 0,
  SPEKE_ATTACK_MALLEABILITY = 1,
  SPEKE_ATTACK_SESSION_SWAP = 2,
  SPEKE_ATTACK_EXP_EQUIVALENCE = 3,
} SpekeAttack;

typedef enum SpekeConfirm {
  SPEKE_CONFIRM_NONE = 0,
  SPEKE_CONFIRM_JABLON_DOUBLE_HASH = 1,
  SPEKE_CONFIRM_TAGGED_HASH34 = 2,
  SPEKE_CONFIRM_SYMMETRIC_HASH = 3,
  SPEKE_CONFIRM_SYMMETRIC_MAC = 4,
  /**
   * The variant's own method.
   */
  SPEKE_CONFIRM_PRESET = 255,
} SpekeConfirm;

typedef enum SpekePhase {
  SPEKE_PHASE_CREATED = 0,
  SPEKE_PHASE_SENT = 1,
  SPEKE_PHASE_KEYED = 2,
  SPEKE_PHASE_CONFIRM_SENT = 3,
  SPEKE_PHASE_ACCEPTED = 4,
  SPEKE_PHASE_ABORTED = 5,
} SpekePhase;

typedef enum SpekeRole {
  SPEKE_ROLE_INITIATOR = 0,
  SPEKE_ROLE_RESPONDER = 1,
} SpekeRole;

/**
 * Result codes.
 */
typedef enum SpekeStatus {
  SPEKE_STATUS_OK = 0,
  SPEKE_STATUS_NULL_POINTER = 1,
  SPEKE_STATUS_INVALID_ARGUMENT = 2,
  SPEKE_STATUS_UNKNOWN_GROUP = 3,
  SPEKE_STATUS_DEGENERATE_GENERATOR = 4,
  SPEKE_STATUS_RANGE_CHECK_FAILED = 5,
  SPEKE_STATUS_PEER_IDENTITY_MISMATCH = 6,
  SPEKE_STATUS_WRONG_PHASE = 7,
  SPEKE_STATUS_CONFIRMATION_DISABLED = 8,
  SPEKE_STATUS_CONFIRMATION_MISMATCH = 9,
  SPEKE_STATUS_DECODE_ERROR = 10,
  SPEKE_STATUS_BUFFER_TOO_SMALL = 11,
  SPEKE_STATUS_INVALID_EXPONENT = 12,
  SPEKE_STATUS_INTERNAL = 255,
} SpekeStatus;

typedef enum SpekeVariant {
  SPEKE_VARIANT_JABLON96 = 0,
  SPEKE_VARIANT_IEEE_P1363_2 = 1,
  SPEKE_VARIANT_ISO11770_4_2006 = 2,
  SPEKE_VARIANT_PATCH2014 = 3,
  SPEKE_VARIANT_P_SPEKE2017 = 4,
} SpekeVariant;

/**
 * Opaque group parameters.
 */
typedef struct SpekeGroup SpekeGroup;

/**
 * Opaque protocol session.
 */
typedef struct SpekeSession SpekeSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next call
 * into this library on the same thread.
 */
const char *speke_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *speke_version(void);

/**
 * Looks up a built-in group (`"toy23"` or `"modp2048"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SpekeStatus speke_group_preset(const char *name, struct SpekeGroup **out);

/**
 * # Safety
 * `group` must be null or a pointer from [`speke_group_preset`] that has not
 * been freed.
 */
void speke_group_free(struct SpekeGroup *group);

/**
 * Octets per encoded element, or 0 for a null group.
 *
 * # Safety
 * `group` must be null or a live group handle.
 */
size_t speke_group_element_width(const struct SpekeGroup *group);

/**
 * Total rounds for a confirmation method, or 0 if the value is invalid.
 */
uint32_t speke_round_count(uint32_t confirm);

/**
 * Starts a session and writes its exchange message (wire payload, without
 * the length frame) to `msg_out`.
 *
 * `variant`, `confirm` and `role` take [`SpekeVariant`], [`SpekeConfirm`]
 * and [`SpekeRole`] values. The ephemeral exponent is drawn from a ChaCha20
 * stream seeded with `seed`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; strings NUL-terminated.
 */
enum SpekeStatus speke_session_new(const struct SpekeGroup *group,
                                   uint32_t variant,
                                   uint32_t confirm,
                                   uint32_t role,
                                   const char *self_id,
                                   const char *peer_id,
                                   const uint8_t *password,
                                   size_t password_len,
                                   uint64_t seed,
                                   struct SpekeSession **out,
                                   uint8_t *msg_out,
                                   size_t msg_cap,
                                   size_t *msg_len);

/**
 * Feeds one received wire payload to the session. If the session now owes
 * its peer a confirmation message, it is written to `reply` and
 * `*reply_len` is set; otherwise `*reply_len` is 0.
 *
 * # Safety
 * `session` must be a live handle; buffers valid for the stated lengths.
 */
enum SpekeStatus speke_session_process(struct SpekeSession *session,
                                       const uint8_t *payload,
                                       size_t payload_len,
                                       uint8_t *reply,
                                       size_t reply_cap,
                                       size_t *reply_len);

/**
 * Current phase; [`SpekePhase::Aborted`] for a null handle.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
enum SpekePhase speke_session_phase(const struct SpekeSession *session);

/**
 * Whether the session finished successfully: accepted, or keyed when the
 * method has no explicit confirmation.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
bool speke_session_is_complete(const struct SpekeSession *session);

/**
 * Copies the 32-octet session key into `out`.
 *
 * # Safety
 * `out` must point to at least [`SPEKE_KEY_LEN`] writable octets.
 */
enum SpekeStatus speke_session_key(const struct SpekeSession *session, uint8_t *out);

/**
 * Copies `SHA-256(key)` into `out`, safe to log or compare.
 *
 * # Safety
 * `out` must point to at least [`SPEKE_KEY_LEN`] writable octets.
 */
enum SpekeStatus speke_session_key_digest(const struct SpekeSession *session, uint8_t *out);

/**
 * # Safety
 * `session` must be null or a live handle, not used afterwards.
 */
void speke_session_free(struct SpekeSession *session);

/**
 * Runs one attack scenario in the simulator and reports whether it
 * succeeded. `attack` takes a [`SpekeAttack`] value; exp-equivalence uses
 * password `0x05`, `r = 3` and a victim holding the base password.
 *
 * # Safety
 * `group` must be a live handle and `success` a valid pointer.
 */
enum SpekeStatus speke_run_attack(const struct SpekeGroup *group,
                                  uint32_t attack,
                                  uint32_t variant,
                                  uint32_t confirm,
                                  uint64_t seed,
                                  bool *success);

/**
 * Renders the security matrix as text. Free the result with
 * [`speke_string_free`].
 *
 * # Safety
 * `group` must be a live handle and `out` a valid pointer.
 */
enum SpekeStatus speke_security_matrix(const struct SpekeGroup *group, uint64_t seed, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void speke_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPEKE_LAB_H */
